import csv
import json

import pytest

from bregman_online import harness
from bregman_online.harness import ConfigError, ExperimentConfig, generate_instance, run_experiment
from bregman_online.instances import instance_from_dict


def config(algorithm, gen_spec, count=3, seed=1, audit="full", **kw):
    return ExperimentConfig(algorithm=algorithm,
                            instance={"generator": gen_spec, "count": count, "seed": seed},
                            audit=audit, name=algorithm, **kw)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_round_trip(tmp_path):
    cfg = config("paging", {"n": [3, 5]}, tolerances={"audit": 1e-6})
    again = ExperimentConfig.from_dict(json.loads(cfg.to_json()))
    assert again == cfg
    p = tmp_path / "c.json"
    p.write_text(cfg.to_json())
    assert ExperimentConfig.load(p) == cfg


@pytest.mark.parametrize("doc", [
    {"schema_version": 2, "algorithm": "paging", "instance": {"file": "x"}},
    {"schema_version": 1, "algorithm": "tsp", "instance": {"file": "x"}},
    {"schema_version": 1, "algorithm": "paging", "instance": {"file": "x"}, "audit": "some"},
    {"schema_version": 1, "algorithm": "paging", "instance": {}},
    {"schema_version": 1, "algorithm": "paging", "instance": {"generator": {}}},
    {"schema_version": 1, "algorithm": "paging", "instance": {"file": "x"}, "colour": 1},
    {"algorithm": "paging", "instance": {"file": "x"}},
    {"schema_version": 1, "algorithm": "paging", "instance": {"file": "x"},
     "tolerances": {"speed": 1}},
])
def test_config_validation(doc):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(doc)


@pytest.mark.parametrize("problem", ["kserver", "paging", "setcover"])
def test_generated_instance_depends_only_on_seed(problem):
    a = generate_instance(problem, {}, 17).to_json()
    b = generate_instance(problem, {}, 17).to_json()
    assert a == b
    assert instance_from_dict(json.loads(a)).to_json() == a


def test_paging_toy_row_respects_bound(tmp_path):
    cfg = config("paging", {"n": 3, "requests": {"model": "uniform_random", "length": 12}}, count=4)
    res = run_experiment(cfg, out_dir=tmp_path)
    for r in rows(res.paths["summary"]):
        assert r["n"] == "3"
        assert r["bound_holds"] == "true"
        if r["empirical_ratio"]:
            assert float(r["empirical_ratio"]) <= float(r["theoretical_bound"]) + 1e-6
        assert r["audits_failed"] == "0"


def test_tiny_kserver_full_audit(tmp_path):
    spec = {"tree": {"kind": "hst", "branching": 2, "depth": 2, "ratio": 0.5},
            "requests": {"model": "adversarial_greedy", "length": 10}}
    res = run_experiment(config("kserver", spec, count=2), out_dir=tmp_path)
    assert res.audit_failures == 0 and res.bound_violations == 0
    for r in rows(res.paths["summary"]):
        assert int(r["audits_passed"]) > 0 and r["audits_failed"] == "0"
    lines = (tmp_path / "trace.jsonl").read_text().splitlines()
    assert json.loads(lines[0])["kind"] == "config"
    kinds = [json.loads(line)["kind"] for line in lines[1:]]
    assert kinds.count("instance") == 2 and kinds.count("step") == 20


def test_setcover_run_and_plot(tmp_path):
    res = run_experiment(config("setcover", {"n": [4, 8], "rows": [5, 10]}), out_dir=tmp_path)
    assert res.bound_violations == 0
    plot = rows(res.paths["plot"])
    assert plot[0].keys() == set(harness.PLOT_COLUMNS)
    summary = rows(res.paths["summary"])
    assert list(summary[0].keys()) == harness.SUMMARY_COLUMNS


def test_file_instances(tmp_path):
    inst = generate_instance("paging", {"n": 4}, 3)
    (tmp_path / "p.json").write_text(inst.to_json())
    cfg = ExperimentConfig(algorithm="paging", instance={"files": ["p.json", "p.json"]})
    res = run_experiment(cfg, base=tmp_path, out_dir=tmp_path / "out")
    assert len(res.outcomes) == 2
    wrong = ExperimentConfig(algorithm="setcover", instance={"file": "p.json"})
    with pytest.raises(ConfigError):
        run_experiment(wrong, base=tmp_path, out_dir=tmp_path / "out2")


def test_oracle_limit_leaves_ratio_empty(tmp_path):
    spec = {"tree": {"kind": "hst", "branching": 2, "depth": 4, "ratio": 0.5},
            "k": 4, "h": 4, "requests": {"length": 3}}
    res = run_experiment(config("kserver", spec, count=1, audit="primal"), out_dir=tmp_path)
    r = rows(res.paths["summary"])[0]
    assert r["n"] == "16"
    assert r["empirical_ratio"] == "" and r["opt_cost"] == ""


def test_rerun_is_byte_identical(tmp_path):
    cfg = config("kserver", {"requests": {"length": 8}}, count=3, samples_per_step=10)
    run_experiment(cfg, out_dir=tmp_path / "a")
    run_experiment(cfg, out_dir=tmp_path / "b")
    cfg.workers = 2
    run_experiment(cfg, out_dir=tmp_path / "c")
    for name in ("trace.jsonl", "summary.csv", "plot.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes()
        if name != "trace.jsonl":        # the trace header records the worker count
            assert a == (tmp_path / "c" / name).read_bytes()


def test_report_helpers():
    good = {"instance_id": "x", "bound_holds": "true", "audits_failed": "0"}
    bad = {"instance_id": "y", "bound_holds": "false", "audits_failed": "1"}
    assert harness.summary_violations([good, bad]) == [bad]
    text = harness.format_report([good, bad])
    assert text.splitlines()[-1] == "2 rows, 1 bound violations, 1 failed audits"
