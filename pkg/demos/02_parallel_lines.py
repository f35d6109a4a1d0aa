"""Inconsistent parallel lines: convergence, gap and shadow.

With A1 = {y = 0}, A2 = {y = 1} and lambda = 1/2 the cyclic map sends
(0, t) to (0, (1 + t) / 4), so iterates contract to (0, 1/3) at rate 1/4
even though the lines never meet.
"""
import numpy as np

from feasolve.analysis import characterize_fixed_point, verify_shadow_affine
from feasolve.diagnostics import fit_rate, gap_at
from feasolve.engine import StopCriteria, iterate
from feasolve.geometry import Hyperplane
from feasolve.operators import CycleOp

sets = [Hyperplane([0, 1], 0), Hyperplane([0, 1], 1)]
op = CycleOp(sets, 0.5)
trace = iterate(op, [0, 0], StopCriteria(residual_tol=1e-12))

for k in range(6):
    print(f"k={k}  x={trace.iterates[k]}  residual={trace.residuals[k]:.3e}")
print("limit          :", trace.final, "after", trace.iterations, "steps")
print("fitted rate    :", fit_rate(trace.residuals).rate)
print("gap at limit   :", gap_at(sets, trace.final).to_dict())

# the limit is a weighted combination of projections from its own chain
rep = characterize_fixed_point(sets, 0.5, trace.final)
print("coefficients   :", np.round(rep.coefficients, 6), "sum", rep.coefficient_sum)
print("representation residual:", rep.representation_residual)

# its shadow on A1 is fixed by the extended cyclic projection map
sh = verify_shadow_affine(sets, 0.5, trace.final, 1e-10)
print("shadow", sh.shadow, "extended-CP residual", sh.cp_residual)
