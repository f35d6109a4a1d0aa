"""Cyclic relaxed Douglas-Rachford methods for feasibility problems.

Submodules
----------
geometry     sets, projectors, reflectors, tangent spaces
operators    pair and cyclic relaxed Douglas-Rachford maps
engine       iteration driver, stopping rules, trace CSV
diagnostics  gaps, shadows, rate fits, empirical constants
analysis     fixed-point characterization and the violation/rate calculus
cli          scenario files and the ``feasolve`` command
"""

from .geometry import (
    AffineSubspace,
    Ball,
    Box,
    Halfspace,
    Hyperplane,
    PointCloud,
    SetSpec,
    Sphere,
    contains,
    distance,
    project,
    reflect,
    set_from_dict,
    shapiro_constant,
    tangent_space,
)
from .operators import (
    CycleOp,
    PairDROp,
    cycle_apply,
    cyclic_projections_apply,
    extended_cp_apply,
    pair_dr_apply,
    pair_dr_apply_alt,
)
from .engine import DivergenceError, StopCriteria, StopReason, detect_orbit, iterate, residual
from .diagnostics import estimate_kappa, estimate_violation, fit_rate, gap_at
from .analysis import characterize_fixed_point, verify_shadow_affine

__version__ = "0.1.0"
