import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _catalog import CONVEX, random_set
from feasolve.geometry import (
    AffineSubspace,
    Ball,
    Box,
    DimensionError,
    GeometryError,
    Halfspace,
    Hyperplane,
    PointCloud,
    Sphere,
    TieRule,
    UnsupportedTangentError,
    contains,
    distance,
    project,
    reflect,
    set_from_dict,
    shapiro_constant,
    tangent_space,
)

KINDS = CONVEX + ("sphere", "cloud")
seeds = st.integers(0, 2**32 - 1)


def test_hyperplane_projection():
    out = project(Hyperplane([0, 1], 0), [3, 4])
    np.testing.assert_array_equal(out.point, [3, 0])
    assert not out.multivalued


def test_sphere_projection_and_tie():
    S = Sphere([0, 0], 1)
    np.testing.assert_allclose(project(S, [2, 0]).point, [1, 0])
    out = project(S, [0, 0])
    np.testing.assert_array_equal(out.point, [1, 0])
    assert out.multivalued and out.tie_rule is TieRule.CANONICAL_DIRECTION


def test_cloud_tie_lowest_index():
    out = project(PointCloud([[0, 0], [2, 0]]), [1, 0])
    np.testing.assert_array_equal(out.point, [0, 0])
    assert out.multivalued and out.tie_rule is TieRule.LOWEST_INDEX


def test_reflect_examples():
    np.testing.assert_array_equal(reflect(Hyperplane([0, 1], 0), [3, 4]), [3, -4])
    np.testing.assert_array_equal(reflect(Ball([0, 0], 1), [0.5, 0]), [0.5, 0])
    np.testing.assert_allclose(reflect(Sphere([0, 0], 1), [2, 0]), [0, 0], atol=1e-15)


def test_distance_examples():
    assert distance(Ball([0, 0], 1), [3, 0]) == pytest.approx(2)
    assert distance(AffineSubspace([0, 0], [[1, 0]]), [5, -2]) == pytest.approx(2)
    assert distance(PointCloud([[0, 0]]), [3, 4]) == pytest.approx(5)


def test_contains_examples():
    assert contains(Box([0, 0], [1, 1]), [0.5, 0.5], 0)
    assert contains(Sphere([0, 0], 1), [1 + 1e-9, 0], 1e-8)
    assert not contains(Halfspace([1, 0], 0), [1, 0], 0.5)
    with pytest.raises(GeometryError):
        contains(Ball([0, 0], 1), [0, 0], -1)


def test_input_validation():
    with pytest.raises(DimensionError):
        project(Ball([0, 0], 1), [1, 2, 3])
    with pytest.raises(GeometryError):
        project(Ball([0, 0], 1), [np.nan, 0])
    with pytest.raises(GeometryError):
        Ball([0, 0], 0)
    with pytest.raises(GeometryError):
        Box([1, 0], [0, 1])
    with pytest.raises(GeometryError):
        Hyperplane([0, 0], 1)


def test_affine_basis_reorthonormalized():
    A = AffineSubspace([1, 2, 3], [[1, 1, 0], [1, 2, 0]])
    np.testing.assert_allclose(A.basis @ A.basis.T, np.eye(2), atol=1e-12)
    assert distance(A, [5, -1, 3]) == pytest.approx(0, abs=1e-12)


def test_affine_from_constraints():
    A = AffineSubspace.from_constraints([[0, 1]], [2])
    np.testing.assert_allclose(project(A, [4, 7]).point, [4, 2])
    with pytest.raises(GeometryError):
        AffineSubspace.from_constraints([[1, 0], [2, 0]], [0, 0])


def test_tangent_examples():
    ax = AffineSubspace([0, 0], [[1, 0]])
    assert tangent_space(ax, [7, 0]) is ax
    L = tangent_space(Sphere([0, 0], 1), [1, 0])
    np.testing.assert_allclose(project(L, [5, 3]).point, [1, 3], atol=1e-12)
    W = tangent_space(Ball([0, 0], 1), [0, 0])
    assert W.subspace_dim == 2 and shapiro_constant(W) == 0


def test_tangent_errors():
    with pytest.raises(GeometryError):
        tangent_space(Sphere([0, 0], 1), [0.5, 0])
    with pytest.raises(UnsupportedTangentError):
        tangent_space(Box([0, 0], [1, 1]), [0, 0])
    with pytest.raises(UnsupportedTangentError):
        tangent_space(Halfspace([1, 0], 0), [0, 3])
    with pytest.raises(UnsupportedTangentError):
        tangent_space(PointCloud([[0, 0]]), [0, 0])


def test_tangent_box_pinned_coordinate():
    L = tangent_space(Box([0, 1], [2, 1]), [1, 1])
    assert L.subspace_dim == 1
    np.testing.assert_allclose(project(L, [5, 4]).point, [5, 1])


def test_shapiro_examples():
    assert shapiro_constant([[1, 0]]) == pytest.approx(1)
    assert shapiro_constant(np.zeros((0, 2))) == 0
    assert shapiro_constant(np.eye(2)) == pytest.approx(1)
    with pytest.raises(GeometryError):
        shapiro_constant([[1, 0], [2, 0]])


@pytest.mark.parametrize("kind", KINDS)
def test_serialization_roundtrip(kind):
    rng = np.random.default_rng(3)
    S = random_set(rng, 3, kind)
    T = set_from_dict(S.to_dict())
    assert T.to_dict() == S.to_dict()
    for x in rng.uniform(-5, 5, (20, 3)):
        np.testing.assert_allclose(project(S, x).point, project(T, x).point, atol=1e-12)


def test_set_from_dict_errors():
    with pytest.raises(GeometryError, match="kind"):
        set_from_dict({"center": [0, 0]})
    with pytest.raises(GeometryError, match="radius"):
        set_from_dict({"kind": "ball", "center": [0, 0]})


@settings(max_examples=60, deadline=None)
@given(seed=seeds, kind=st.sampled_from(KINDS), n=st.sampled_from([2, 3, 5]))
def test_projection_properties(seed, kind, n):
    rng = np.random.default_rng(seed)
    S = random_set(rng, n, kind)
    for x in rng.uniform(-10, 10, (20, n)):
        p = project(S, x).point
        assert contains(S, p, 1e-10)
        np.testing.assert_allclose(project(S, p).point, p, atol=1e-10)
        assert distance(S, x) == pytest.approx(np.linalg.norm(x - p), abs=1e-12)
        np.testing.assert_array_equal(reflect(S, x), 2 * p - x)
        np.testing.assert_array_equal(project(S, x).point, p)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, kind=st.sampled_from(CONVEX), n=st.sampled_from([2, 3, 5]))
def test_convex_projection_variational_inequality(seed, kind, n):
    # independent optimality oracle: <x - Px, z - Px> <= 0 for every z in S
    rng = np.random.default_rng(seed)
    S = random_set(rng, n, kind)
    zs = [project(S, z).point for z in rng.uniform(-10, 10, (30, n))]
    for x in rng.uniform(-10, 10, (10, n)):
        p = project(S, x).point
        for z in zs:
            assert (x - p) @ (z - p) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=seeds, kind=st.sampled_from(CONVEX), n=st.sampled_from([2, 3, 5]))
def test_convex_firm_nonexpansive(seed, kind, n):
    rng = np.random.default_rng(seed)
    S = random_set(rng, n, kind)
    for _ in range(20):
        x, y = rng.uniform(-10, 10, (2, n))
        px, py = project(S, x).point, project(S, y).point
        lhs = np.sum((px - py) ** 2) + np.sum(((px - x) - (py - y)) ** 2)
        assert lhs <= np.sum((x - y) ** 2) + 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=seeds, kind=st.sampled_from(["affine", "hyperplane", "sphere"]), n=st.sampled_from([2, 3]))
def test_shapiro_inequality(seed, kind, n):
    rng = np.random.default_rng(seed)
    S = random_set(rng, n, kind)
    ybar = project(S, rng.uniform(-5, 5, n)).point
    L = tangent_space(S, ybar)
    k = shapiro_constant(L)
    T0 = AffineSubspace(np.zeros(n), L.basis)
    for x in rng.uniform(-5, 5, (20, n)):
        assert distance(T0, x - ybar) <= k * np.linalg.norm(x - ybar) + 1e-10
