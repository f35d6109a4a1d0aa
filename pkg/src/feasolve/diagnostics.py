"""Empirical monitoring: gaps, shadows, almost-fixed tests and rate estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import IterationTrace, residual
from .geometry import SetSpec, as_point
from .operators import CycleOp, PairDROp, _cycle, _gap_chain, pair_dr_apply

__all__ = [
    "GapReport",
    "RateFit",
    "FneEstimate",
    "InsufficientDataError",
    "gap_at",
    "almost_fixed",
    "fit_rate",
    "estimate_kappa",
    "estimate_violation",
    "shadow_trace",
]


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class GapReport:
    """Projection chain ``[y^(m+1), y^(m), ..., y^(1)]`` and its link lengths.

    ``pair_gaps[i - 1] = |y^(i+1) - y^(i)|`` for ``i = 1..m``.
    """

    shadow_chain: list
    pair_gaps: list
    total: float

    def to_dict(self):
        return {
            "shadow_chain": [p.tolist() for p in self.shadow_chain],
            "pair_gaps": list(self.pair_gaps),
            "total": self.total,
        }


def gap_at(sets, y) -> GapReport:
    sets = list(sets)
    y = as_point(y, dim=sets[0].dim, name="y")
    chain = _gap_chain(sets, y)
    m = len(sets)
    # chain[m + 1 - i] is y^(i)
    pair_gaps = [float(np.linalg.norm(chain[m - i] - chain[m + 1 - i])) for i in range(1, m + 1)]
    return GapReport(chain, pair_gaps, sum(pair_gaps))


def almost_fixed(op: CycleOp, x, eps: float) -> bool:
    """Whether ``x`` lies within `eps` of its image under ``T``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return residual(op, x) <= eps


@dataclass(frozen=True)
class RateFit:
    rate: float
    intercept: float
    window_start: int
    r_squared: float
    converged: bool

    def to_dict(self):
        return {
            "rate": self.rate,
            "intercept": self.intercept,
            "window_start": self.window_start,
            "r_squared": self.r_squared,
            "converged": self.converged,
        }


def fit_rate(values, tail_fraction: float = 0.5) -> RateFit:
    """Least-squares fit of ``log(values[k]) ~ intercept + k log(rate)``.

    The sequence is cut at its first non-positive entry and the fit uses the
    trailing `tail_fraction` of what remains.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size < 5:
        raise InsufficientDataError("need a sequence of at least 5 values")
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    bad = np.flatnonzero(~(vals > 0))
    usable = vals[: bad[0]] if bad.size else vals
    count = int(math.ceil(tail_fraction * usable.size))
    if count < 3:
        raise InsufficientDataError(f"only {count} positive values in the fitted window")
    start = usable.size - count
    k = np.arange(start, usable.size, dtype=float)
    logs = np.log(usable[start:])
    slope, intercept = np.polyfit(k, logs, 1)
    ss_res = float(np.sum((logs - (intercept + slope * k)) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    rate = float(math.exp(slope))
    return RateFit(rate, float(intercept), start, r2, bool(rate < 1 and r2 >= 0.99))


def estimate_kappa(op: CycleOp, fix_approx, samples, fix_tol=1e-8, skip_below=1e-14) -> float:
    """Largest ratio ``|x - fix_approx| / |x - T x|`` over `samples`.

    Distance to one converged point stands in for distance to the fixed-point
    set, so the estimate is biased upward when that set is not a singleton.
    """
    fix = as_point(fix_approx, dim=op.dim, name="fix_approx")
    if residual(op, fix) > fix_tol:
        raise ValueError("fix_approx is not an approximate fixed point")
    best = None
    for x in samples:
        x = as_point(x, dim=op.dim, name="sample")
        r = residual(op, x)
        if r < skip_below:
            continue
        ratio = float(np.linalg.norm(x - fix)) / r
        best = ratio if best is None else max(best, ratio)
    if best is None:
        raise ValueError("every sample had a negligible residual")
    return best


@dataclass(frozen=True)
class FneEstimate:
    alpha: float
    epsilon_hat: float
    samples: int


def _as_map(op):
    if isinstance(op, SetSpec):
        return lambda x: op._project(x)[0]
    if isinstance(op, CycleOp):
        return lambda x: _cycle(op.sets, op.lam, x, False)[0]
    if isinstance(op, PairDROp):
        return lambda x: pair_dr_apply(op, x)
    if callable(op):
        return op
    raise TypeError(f"cannot evaluate {type(op).__name__} as a map")


def estimate_violation(op, anchor, samples, alpha: float) -> FneEstimate:
    """Smallest violation making the a-alpha-fne inequality hold at `anchor` on `samples`.

    `op` is a set (its projector), a pair or cycle operator, or any callable.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    f = _as_map(op)
    y = as_point(anchor, name="anchor")
    y_plus = f(y)
    weight = (1.0 - alpha) / alpha
    worst = -np.inf
    count = 0
    for x in samples:
        x = as_point(x, dim=y.shape[0], name="sample")
        d2 = float(np.sum((x - y) ** 2))
        if d2 == 0.0:
            raise ValueError("samples must differ from the anchor")
        x_plus = f(x)
        lhs = np.sum((x_plus - y_plus) ** 2) + weight * np.sum(((x_plus - x) - (y_plus - y)) ** 2)
        worst = max(worst, float(lhs) / d2 - 1.0)
        count += 1
    if count == 0:
        raise ValueError("no samples given")
    return FneEstimate(alpha, max(worst, 0.0), count)


def shadow_trace(trace: IterationTrace, first_set: SetSpec) -> list:
    if not trace.iterates:
        raise ValueError("empty trace")
    return [first_set.project(x).point for x in trace.iterates]
