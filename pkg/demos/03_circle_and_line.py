"""A nonconvex instance: the unit circle and the line y = 1/2.

Started near the intersection point (sqrt(3)/2, 1/2) with lambda = 0.4 the
iteration converges there.  The error budget for replacing the circle by its
tangent line bounds how far the shadow can be from a cyclic-projection fixed
point.
"""
import math

import numpy as np

from feasolve.analysis import affine_approx_budget, characterize_fixed_point, verify_shadow_almost_fixed
from feasolve.engine import StopCriteria, iterate
from feasolve.geometry import Hyperplane, Sphere
from feasolve.operators import CycleOp

sets = [Sphere([0, 0], 1), Hyperplane([0, 1], 0.5)]
root = np.array([math.sqrt(3) / 2, 0.5])
trace = iterate(CycleOp(sets, 0.4), root + [0.06, -0.04], StopCriteria(residual_tol=1e-12))
print("limit", trace.final, "distance to root", np.linalg.norm(trace.final - root))

rep = characterize_fixed_point(sets, 0.4, trace.final)
print("fixed:", rep.is_fixed, " convex weights:", rep.convex_combination, " hull certified:", rep.in_convex_hull)

# eps_U for the circle has to be supplied; 0.01 is an illustrative value
anchors = [S.project(trace.final).point for S in sets]
budget = affine_approx_budget(sets, anchors, [0.05, 0.05], eps_U=[0.01, None])
print("composed errors", budget.composed_eps, "total budget", budget.total_eps, "radii", budget.radii)
print(verify_shadow_almost_fixed(sets, 0.4, trace.final, budget))
