"""Sets, projectors and reflectors.

Every set in the catalog exposes project / reflect / distance.  Where the
nearest point is not unique (the centre of a sphere, equidistant cloud
points) a fixed selection is returned together with a flag.
"""
import numpy as np

from feasolve.geometry import Ball, Box, Hyperplane, PointCloud, Sphere, shapiro_constant, tangent_space

line = Hyperplane([0, 1], 0)  # y = 0
print("P_line(3, 4)  =", line.project([3, 4]).point)
print("R_line(3, 4)  =", line.reflect([3, 4]))

circle = Sphere([0, 0], 1)
print("P_circle(2, 0) =", circle.project([2, 0]).point)
out = circle.project([0, 0])  # every point of the circle is nearest
print("P_circle(0, 0) =", out.point, "multivalued:", out.multivalued, "rule:", out.tie_rule.value)

cloud = PointCloud([[0, 0], [2, 0]])
out = cloud.project([1, 0])
print("P_cloud(1, 0)  =", out.point, "rule:", out.tie_rule.value)

# projectors onto convex sets are firmly nonexpansive
rng = np.random.default_rng(0)
box = Box([0, 0], [1, 2])
x, y = rng.uniform(-3, 3, (2, 2))
px, py = box.project(x).point, box.project(y).point
lhs = np.sum((px - py) ** 2) + np.sum(((px - x) - (py - y)) ** 2)
print(f"firm nonexpansiveness on the box: {lhs:.4f} <= {np.sum((x - y) ** 2):.4f}")

# tangent spaces and the Shapiro constant
L = tangent_space(circle, [1, 0])
print("tangent line at (1, 0) passes through", L.anchor, "with direction", L.basis[0])
print("Shapiro constant of that tangent line:", shapiro_constant(L))
print("Shapiro constant at a ball interior:", shapiro_constant(tangent_space(Ball([0, 0], 1), [0, 0])))
