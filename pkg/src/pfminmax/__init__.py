"""Parameter-free coin-betting solvers for convex-concave saddle-point problems."""

from .core import Box, L2Ball, Simplex, SparseVector, project
from .data import Dataset, LabelRemap, load_libsvm, parse_libsvm, remap_labels, split
from .metrics import RunRecord, duality_gap, hinge_losses, kl
from .problems import DroProblem, SyntheticProblem
from .solvers import (
    RestartSchedule,
    SolverOutput,
    cb_min_max,
    cb_min_max_simplex,
    default_step_sizes,
    primal_dual_gradient,
    restart_cb_min_max,
)

__version__ = "0.1.0"
