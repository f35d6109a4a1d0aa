"""Comparing relaxation parameters on one instance.

Three pairwise disjoint discs.  The sweep reports the limit, the gap and the
observed rate side by side; lambda = 0 reduces to cyclic projections.  The
gap limits differ with lambda but no ranking is implied by them.
"""
from feasolve.diagnostics import fit_rate, InsufficientDataError
from feasolve.engine import StopCriteria, iterate
from feasolve.geometry import Ball
from feasolve.operators import CycleOp

sets = [Ball([0, 0], 1), Ball([3, 0], 1), Ball([1.5, 2.5], 0.8)]
for lam in (0.0, 0.25, 0.5, 0.75, 0.95):
    tr = iterate(CycleOp(sets, lam), [5, 5], StopCriteria(max_iters=20000, residual_tol=1e-12))
    try:
        rate = f"{fit_rate(tr.residuals).rate:.4f}"
    except InsufficientDataError:
        rate = "n/a"
    print(f"lambda={lam:<5} steps={tr.iterations:<6} limit={tr.final.round(6)}  gap={tr.gaps[-1]:.6f}  rate={rate}")
