"""From set regularity constants to a linear rate bound.

Per-set constants eps_U feed the projector and reflector violations, then
the pair violations, the violation of the whole cycle, and finally the rate
bound c_bar for a given metric-subregularity constant kappa.
"""
from feasolve.analysis import BudgetRangeError, linear_rate_bound, projector_violations, regularity_budget
from feasolve.diagnostics import estimate_kappa, fit_rate
from feasolve.engine import StopCriteria, iterate
from feasolve.geometry import Hyperplane
from feasolve.operators import CycleOp

print(projector_violations(0.1))

rb = regularity_budget([0, 0, 0], 0.5, 2.0)
print("convex, m=3: alpha", rb.composite_alpha, "eps", rb.composite_eps, "c_bar", rb.rate_bound)

rb = regularity_budget([1e-3, 0, 0], 0.5, 1.5)
print("slightly nonconvex: pair violations", rb.pair_violations, "c_bar", rb.rate_bound)

try:
    regularity_budget([0, 0, 0], 0.5, 0.2)
except BudgetRangeError as exc:
    print("rejected:", exc)

# empirical side on the parallel-lines instance
op = CycleOp([Hyperplane([0, 1], 0), Hyperplane([0, 1], 1)], 0.5)
kappa = estimate_kappa(op, [0, 1 / 3], [[0, t] for t in (-3, -1, 0, 2, 5)])
c_bar = linear_rate_bound(2 / 3, 0, kappa)
rate = fit_rate(iterate(op, [0, 0], StopCriteria(residual_tol=1e-12)).residuals).rate
print(f"kappa ~ {kappa:.6f}, bound c_bar = {c_bar:.6f}, observed rate = {rate:.6f}")
