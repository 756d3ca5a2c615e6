"""Online k-server on trees, weighted paging and set cover by Bregman projection.

The core loop is the same for all three problems: keep a fractional point
in a convex body, and on each request project it onto the body's
restriction under an entropic divergence.
"""
from .bregman import (ConvergenceError, DivergenceParams, ProjectionError, ProjectionResult,
                      divergence, pdiv, potential, project, pythagorean_gap, reference_project)
from .kserver import KServerState, audit_step, init_state, run, serve
from .offline import OfflineSolution, opt_kserver, opt_paging, opt_setcover
from .paging import PagingParams, paging_project, paging_run
from .polytope import PolytopeSpec, check_membership, separate, shift_for, tight_sets
from .setcover import sc_project, sc_run
from .tree import (WeightedTree, build_tree, encode_integer, reduce_depth, server_distance,
                   star, to_server_vector, tree_norm)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DivergenceParams", "KServerState", "OfflineSolution", "PagingParams",
    "PolytopeSpec", "ProjectionError", "ProjectionResult", "WeightedTree", "audit_step",
    "build_tree", "check_membership", "divergence", "encode_integer", "init_state",
    "opt_kserver", "opt_paging", "opt_setcover", "paging_project", "paging_run", "pdiv",
    "potential", "project", "pythagorean_gap", "reduce_depth", "reference_project", "run",
    "sc_project", "sc_run", "separate", "serve", "server_distance", "shift_for", "star",
    "tight_sets", "to_server_vector", "tree_norm",
]
