"""Fixed-point iteration driver for the cyclic relaxed Douglas-Rachford map."""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import as_point
from .operators import CycleOp, _cycle, _gap_total

__all__ = [
    "StopReason",
    "StopCriteria",
    "IterationTrace",
    "OrbitReport",
    "DivergenceError",
    "iterate",
    "residual",
    "detect_orbit",
    "write_trace_csv",
    "read_trace_csv",
]

log = logging.getLogger(__name__)


class StopReason(str, enum.Enum):
    MAX_ITERS = "max_iters"
    STEP_TOL = "step_tol"
    SHADOW_TOL = "shadow_tol"
    RESIDUAL_TOL = "residual_tol"


@dataclass(frozen=True)
class StopCriteria:
    """Stopping rules; a tolerance of 0 disables that rule.

    A rule fires when its monitored quantity is ``<= tol``.  `divergence_bound`
    aborts the run when an iterate's norm exceeds it.
    """

    max_iters: int = 100_000
    step_tol: float = 1e-10
    shadow_tol: float = 0.0
    residual_tol: float = 0.0
    divergence_bound: float = 1e12

    def __post_init__(self):
        if isinstance(self.max_iters, bool) or int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be an integer >= 1")
        for name in ("step_tol", "shadow_tol", "residual_tol"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0")
        if not self.divergence_bound > 0:
            raise ValueError("divergence_bound must be positive")

    def to_dict(self):
        return {
            "max_iters": int(self.max_iters),
            "step_tol": self.step_tol,
            "shadow_tol": self.shadow_tol,
            "residual_tol": self.residual_tol,
            "divergence_bound": self.divergence_bound,
        }


@dataclass
class IterationTrace:
    """Record of a run ``x^{k+1} = T x^k``.

    Per iterate (length ``K + 1``): `iterates`, `residuals` (``|x^k - T x^k|``),
    `shadows` (``P_{A_1} x^k``) and `gaps`.  Per step (length ``K``):
    `step_norms` and `shadow_step_norms`.
    """

    iterates: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    shadows: list = field(default_factory=list)
    shadow_step_norms: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    stop_reason: StopReason | None = None
    multivalued_hit: bool = False

    @property
    def iterations(self):
        return len(self.step_norms)

    @property
    def final(self):
        return self.iterates[-1]


class DivergenceError(RuntimeError):
    """The iteration left the finite / bounded region; `trace` holds the run so far."""

    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


def residual(op: CycleOp, x) -> float:
    """``|x - T x|`` for the deterministic selection of ``T``."""
    x = as_point(x, dim=op.dim)
    return float(np.linalg.norm(x - _cycle(op.sets, op.lam, x, False)[0]))


def iterate(op: CycleOp, x0, stop: StopCriteria | None = None) -> IterationTrace:
    stop = stop or StopCriteria()
    sets, lam = op.sets, op.lam
    first = sets[0]
    x = as_point(x0, dim=op.dim, name="x0")

    trace = IterationTrace()
    tx, _, hit = _cycle(sets, lam, x, False)
    shadow = first._project(x)[0]
    trace.iterates.append(x)
    trace.residuals.append(float(np.linalg.norm(x - tx)))
    trace.shadows.append(shadow)
    trace.gaps.append(_gap_total(sets, x))
    trace.multivalued_hit = hit

    for k in range(int(stop.max_iters)):
        x_new = tx
        nrm = np.linalg.norm(x_new)
        if not np.isfinite(nrm) or nrm > stop.divergence_bound:
            trace.stop_reason = None
            raise DivergenceError(f"iterate {k + 1} has norm {nrm:.3g}", trace)
        tx, _, hit = _cycle(sets, lam, x_new, False)
        shadow_new = first._project(x_new)[0]
        step = float(np.linalg.norm(x_new - x))
        sstep = float(np.linalg.norm(shadow_new - shadow))
        res = float(np.linalg.norm(x_new - tx))
        trace.iterates.append(x_new)
        trace.step_norms.append(step)
        trace.residuals.append(res)
        trace.shadows.append(shadow_new)
        trace.shadow_step_norms.append(sstep)
        trace.gaps.append(_gap_total(sets, x_new))
        trace.multivalued_hit = trace.multivalued_hit or hit
        x, shadow = x_new, shadow_new

        if stop.step_tol > 0 and step <= stop.step_tol:
            trace.stop_reason = StopReason.STEP_TOL
        elif stop.shadow_tol > 0 and sstep <= stop.shadow_tol:
            trace.stop_reason = StopReason.SHADOW_TOL
        elif stop.residual_tol > 0 and res <= stop.residual_tol:
            trace.stop_reason = StopReason.RESIDUAL_TOL
        if trace.stop_reason is not None:
            break
    else:
        trace.stop_reason = StopReason.MAX_ITERS
    log.debug("iterate: %d steps, stop=%s", trace.iterations, trace.stop_reason.value)
    return trace


@dataclass(frozen=True)
class OrbitReport:
    is_orbit: bool
    mean_step: float
    step_variation: float
    shadow_final_diff: float
    window: int
    heuristic: bool = True


# thresholds of the orbit heuristic
ORBIT_REL_VARIATION = 1e-3
ORBIT_MEAN_FACTOR = 10.0


def detect_orbit(trace: IterationTrace, window: int, shadow_tol: float) -> OrbitReport:
    """Flag runs whose steps settle at a nonzero constant while shadows converge.

    Over the last `window` steps: the spread ``max - min`` of the step norms
    must be below ``1e-3`` times their mean, the mean must exceed
    ``10 * shadow_tol``, and every shadow step must be ``<= shadow_tol``.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(trace.iterates) < window + 1:
        raise ValueError(f"trace has {len(trace.iterates)} iterates, need at least {window + 1}")
    steps = np.asarray(trace.step_norms[-window:])
    shadows = np.asarray(trace.shadow_step_norms[-window:])
    mean = float(steps.mean())
    variation = float(steps.max() - steps.min())
    final_diff = float(shadows[-1])
    is_orbit = (
        mean > ORBIT_MEAN_FACTOR * shadow_tol
        and mean > 0
        and variation < ORBIT_REL_VARIATION * mean
        and float(shadows.max()) <= shadow_tol
    )
    return OrbitReport(bool(is_orbit), mean, variation, final_diff, window)


def _fmt(v):
    return repr(float(v))


def write_trace_csv(trace: IterationTrace, path) -> None:
    """One row per iterate; step columns are empty on row 0."""
    n = trace.iterates[0].shape[0]
    header = (
        ["iter"]
        + [f"x_{i}" for i in range(n)]
        + ["step_norm", "residual"]
        + [f"shadow_{i}" for i in range(n)]
        + ["shadow_step_norm", "gap"]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, x in enumerate(trace.iterates):
            step = _fmt(trace.step_norms[k - 1]) if k else ""
            sstep = _fmt(trace.shadow_step_norms[k - 1]) if k else ""
            w.writerow(
                [k]
                + [_fmt(v) for v in x]
                + [step, _fmt(trace.residuals[k])]
                + [_fmt(v) for v in trace.shadows[k]]
                + [sstep, _fmt(trace.gaps[k])]
            )


def read_trace_csv(path) -> IterationTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = sum(1 for h in header if h.startswith("x_"))
    trace = IterationTrace()
    for k, row in enumerate(body):
        vals = row[1:]
        trace.iterates.append(np.array([float(v) for v in vals[:n]]))
        if k:
            trace.step_norms.append(float(vals[n]))
        trace.residuals.append(float(vals[n + 1]))
        trace.shadows.append(np.array([float(v) for v in vals[n + 2 : 2 * n + 2]]))
        if k:
            trace.shadow_step_norms.append(float(vals[2 * n + 2]))
        trace.gaps.append(float(vals[2 * n + 3]))
    return trace
