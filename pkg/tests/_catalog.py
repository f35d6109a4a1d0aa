"""Random instance builders shared by the test modules."""

import numpy as np

from feasolve.geometry import AffineSubspace, Ball, Box, Halfspace, Hyperplane, PointCloud, Sphere

CONVEX = ("affine", "hyperplane", "halfspace", "ball", "box")


def random_set(rng, n, kind):
    if kind == "affine":
        k = int(rng.integers(0, n))
        return AffineSubspace(rng.uniform(-3, 3, n), rng.normal(size=(k, n)))
    if kind == "hyperplane":
        return Hyperplane(rng.normal(size=n), rng.uniform(-3, 3))
    if kind == "halfspace":
        return Halfspace(rng.normal(size=n), rng.uniform(-3, 3))
    if kind == "ball":
        return Ball(rng.uniform(-3, 3, n), rng.uniform(0.5, 3))
    if kind == "box":
        a, b = rng.uniform(-3, 3, n), rng.uniform(-3, 3, n)
        return Box(np.minimum(a, b), np.maximum(a, b))
    if kind == "sphere":
        return Sphere(rng.uniform(-3, 3, n), rng.uniform(0.5, 3))
    if kind == "cloud":
        return PointCloud(rng.uniform(-3, 3, (int(rng.integers(1, 6)), n)))
    raise ValueError(kind)


def random_convex(rng, n):
    return random_set(rng, n, CONVEX[int(rng.integers(len(CONVEX)))])


def consistent_instance(rng, n):
    """Affine subspace, ball and halfspace sharing the point ``z``.

    ``z`` is the affine anchor and lies strictly inside the ball and the
    halfspace, so every projector returns it unchanged.
    """
    z = rng.uniform(-2, 2, n)
    k = int(rng.integers(1, n))
    aff = AffineSubspace(z, rng.normal(size=(k, n)))
    u = rng.normal(size=n)
    u /= np.linalg.norm(u)
    r = rng.uniform(0.5, 2.0)
    ball = Ball(z + rng.uniform(0, 0.9 * r) * u, r)
    a = rng.normal(size=n)
    half = Halfspace(a, a @ z + rng.uniform(0.1, 1) * np.linalg.norm(a))
    return [aff, ball, half], z
