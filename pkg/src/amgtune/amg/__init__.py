"""Classical algebraic multigrid: CLJP coarsening, four smoothers, V-cycle, PCG."""
from amgtune.amg.coarsening import CfSplitting, StrengthGraph, build_interpolation, build_strength, cljp_split
from amgtune.amg.hierarchy import AmgHierarchy, amg_setup
from amgtune.amg.smoothers import SMOOTHER_NAMES, SmootherKind, smooth
from amgtune.amg.solvers import SolveReport, amg_solve, convergence_factor, pcg_solve, solve, vcycle, warmup

__all__ = [
    "AmgHierarchy",
    "CfSplitting",
    "SMOOTHER_NAMES",
    "SmootherKind",
    "SolveReport",
    "StrengthGraph",
    "amg_setup",
    "amg_solve",
    "build_interpolation",
    "build_strength",
    "cljp_split",
    "convergence_factor",
    "pcg_solve",
    "smooth",
    "solve",
    "vcycle",
    "warmup",
]
