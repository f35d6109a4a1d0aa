"""Analytic closed sets with exact metric projectors.

Every set in the catalog exposes a deterministic single-valued selection of
its (possibly set-valued) metric projector.  When the projector is not a
singleton at the query point the returned :class:`ProjectionOutcome` carries
``multivalued=True`` and names the tie rule that picked the point:

* sphere centre: ``center + radius * e_1`` (``TieRule.CANONICAL_DIRECTION``)
* equidistant point-cloud members: the lowest index (``TieRule.LOWEST_INDEX``)

Points are plain 1-d ``float64`` numpy arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "DimensionError",
    "UnsupportedTangentError",
    "TieRule",
    "ProjectionOutcome",
    "SetSpec",
    "AffineSubspace",
    "Hyperplane",
    "Halfspace",
    "Ball",
    "Sphere",
    "Box",
    "PointCloud",
    "as_point",
    "project",
    "reflect",
    "distance",
    "contains",
    "tangent_space",
    "shapiro_constant",
    "set_from_dict",
    "CONVEX_KINDS",
    "AFFINE_KINDS",
]

MEMBERSHIP_TOL = 1e-10
ORTHONORMAL_TOL = 1e-12
# relative slack for declaring two cloud distances equal
_TIE_RTOL = 1e-12


class GeometryError(ValueError):
    """Invalid set construction or query."""


class DimensionError(GeometryError):
    pass


class UnsupportedTangentError(GeometryError):
    """The tangent cone at the anchor is not a linear subspace."""


class TieRule(str, enum.Enum):
    NONE = "none"
    CANONICAL_DIRECTION = "canonical_direction"
    LOWEST_INDEX = "lowest_index"


@dataclass(frozen=True)
class ProjectionOutcome:
    point: np.ndarray
    multivalued: bool = False
    tie_rule: TieRule = TieRule.NONE


def as_point(x, dim=None, name="x"):
    """Return `x` as a finite 1-d float array, optionally checking its length."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} has non-finite entries")
    return arr


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _orthonormal_rows(vectors, dim):
    """Orthonormal basis (as rows) for the span of `vectors`."""
    vecs = np.asarray(vectors, dtype=float).reshape(-1, dim)
    if vecs.shape[0] == 0:
        return np.zeros((0, dim))
    if np.max(np.abs(vecs @ vecs.T - np.eye(vecs.shape[0]))) <= ORTHONORMAL_TOL:
        # already orthonormal: keep as given so serialization round-trips exactly
        return vecs
    _, s, vt = np.linalg.svd(vecs, full_matrices=False)
    rank = int(np.sum(s > ORTHONORMAL_TOL * max(1.0, s[0])))
    return vt[:rank]


def _complement_rows(basis, dim):
    """Orthonormal rows spanning the orthogonal complement of ``rowspan(basis)``."""
    if basis.shape[0] == 0:
        return np.eye(dim)
    _, _, vt = np.linalg.svd(basis, full_matrices=True)
    return vt[basis.shape[0]:]


class SetSpec:
    """Base class of the set catalog.

    Subclasses implement ``_project`` (unchecked, returns ``(point, multivalued,
    tie_rule)``), ``dim`` and ``to_dict``.
    """

    kind: str = ""
    convex: bool = True

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def _project(self, x):
        raise NotImplementedError

    def project(self, x) -> ProjectionOutcome:
        return project(self, x)

    def reflect(self, x) -> np.ndarray:
        return reflect(self, x)

    def distance(self, x) -> float:
        return distance(self, x)

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        return contains(self, x, tol)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class AffineSubspace(SetSpec):
    """``anchor + span(basis)``; `basis` rows are re-orthonormalized.

    Use :meth:`from_constraints` to build ``{x : A x = b}``; the constraint
    matrix is then kept verbatim for :func:`shapiro_constant`.  Otherwise the
    constraint rows are the orthonormal complement of the basis.
    """

    anchor: np.ndarray
    basis: np.ndarray = None
    constraints: np.ndarray = field(default=None, repr=False)
    rhs: np.ndarray = field(default=None, repr=False)
    from_constraint_form: bool = field(default=False, repr=False)

    kind = "affine"

    def __post_init__(self):
        anchor = as_point(self.anchor, name="anchor")
        n = anchor.shape[0]
        basis = _orthonormal_rows([] if self.basis is None else self.basis, n)
        if self.constraints is None:
            cons = _complement_rows(basis, n)
            rhs = cons @ anchor
        else:
            cons = np.asarray(self.constraints, dtype=float).reshape(-1, n)
            rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        object.__setattr__(self, "anchor", _frozen(anchor))
        object.__setattr__(self, "basis", _frozen(basis))
        object.__setattr__(self, "constraints", _frozen(cons))
        object.__setattr__(self, "rhs", _frozen(rhs))
        gram = basis @ basis.T
        if basis.shape[0] and np.max(np.abs(gram - np.eye(basis.shape[0]))) > ORTHONORMAL_TOL:
            raise GeometryError("basis could not be orthonormalized")

    @classmethod
    def from_constraints(cls, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise DimensionError("A and b have mismatched row counts")
        n = A.shape[1]
        if A.shape[0] and np.linalg.matrix_rank(A) < A.shape[0]:
            raise GeometryError("constraint matrix A must have full row rank")
        if A.shape[0]:
            anchor = np.linalg.lstsq(A, b, rcond=None)[0]
            basis = _complement_rows(_orthonormal_rows(A, n), n)
        else:
            anchor = np.zeros(n)
            basis = np.eye(n)
        return cls(anchor, basis, constraints=A, rhs=b, from_constraint_form=True)

    @classmethod
    def whole_space(cls, anchor):
        anchor = as_point(anchor, name="anchor")
        return cls(anchor, np.eye(anchor.shape[0]))

    @property
    def dim(self):
        return self.anchor.shape[0]

    @property
    def subspace_dim(self):
        return self.basis.shape[0]

    def _project(self, x):
        d = x - self.anchor
        return self.anchor + self.basis.T @ (self.basis @ d), False, TieRule.NONE

    def linear_projector(self):
        """``(L, c)`` with ``P(x) = L @ x + c``."""
        L = self.basis.T @ self.basis
        return L, self.anchor - L @ self.anchor

    def to_dict(self):
        if self.from_constraint_form:
            return {"kind": self.kind, "A": self.constraints.tolist(), "b": self.rhs.tolist()}
        return {"kind": self.kind, "anchor": self.anchor.tolist(), "basis": self.basis.tolist()}


def _unit_normal(normal, offset):
    a = as_point(normal, name="normal")
    nrm = np.linalg.norm(a)
    if nrm == 0.0:
        raise GeometryError("normal must be nonzero")
    offset = float(offset)
    if abs(nrm - 1.0) > ORTHONORMAL_TOL:
        a, offset = a / nrm, offset / nrm
    return _frozen(a), offset


@dataclass(frozen=True, eq=False)
class Hyperplane(SetSpec):
    """``{x : <normal, x> = offset}``."""

    normal: np.ndarray
    offset: float

    kind = "hyperplane"

    def __post_init__(self):
        a, b = _unit_normal(self.normal, self.offset)
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", b)

    @property
    def dim(self):
        return self.normal.shape[0]

    def _project(self, x):
        return x - (self.normal @ x - self.offset) * self.normal, False, TieRule.NONE

    def as_affine(self):
        anchor = self.offset * self.normal
        return AffineSubspace(anchor, _complement_rows(self.normal[None, :], self.dim))

    def to_dict(self):
        return {"kind": self.kind, "normal": self.normal.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Halfspace(SetSpec):
    """``{x : <normal, x> <= offset}``."""

    normal: np.ndarray
    offset: float

    kind = "halfspace"

    def __post_init__(self):
        a, b = _unit_normal(self.normal, self.offset)
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", b)

    @property
    def dim(self):
        return self.normal.shape[0]

    def _project(self, x):
        excess = self.normal @ x - self.offset
        if excess <= 0.0:
            return x, False, TieRule.NONE
        return x - excess * self.normal, False, TieRule.NONE

    def to_dict(self):
        return {"kind": self.kind, "normal": self.normal.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Ball(SetSpec):
    center: np.ndarray
    radius: float

    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(as_point(self.center, name="center")))
        r = float(self.radius)
        if not (np.isfinite(r) and r > 0):
            raise GeometryError("radius must be positive")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self):
        return self.center.shape[0]

    def _project(self, x):
        d = x - self.center
        nrm = np.linalg.norm(d)
        if nrm <= self.radius:
            return x, False, TieRule.NONE
        return self.center + (self.radius / nrm) * d, False, TieRule.NONE

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Sphere(SetSpec):
    center: np.ndarray
    radius: float

    kind = "sphere"
    convex = False

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(as_point(self.center, name="center")))
        r = float(self.radius)
        if not (np.isfinite(r) and r > 0):
            raise GeometryError("radius must be positive")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self):
        return self.center.shape[0]

    def _project(self, x):
        d = x - self.center
        nrm = np.linalg.norm(d)
        if nrm == 0.0:
            p = self.center.copy()
            p[0] += self.radius
            return p, True, TieRule.CANONICAL_DIRECTION
        return self.center + (self.radius / nrm) * d, False, TieRule.NONE

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Box(SetSpec):
    lower: np.ndarray
    upper: np.ndarray

    kind = "box"

    def __post_init__(self):
        lo = as_point(self.lower, name="lower")
        hi = as_point(self.upper, dim=lo.shape[0], name="upper")
        if np.any(lo > hi):
            raise GeometryError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(hi))

    @property
    def dim(self):
        return self.lower.shape[0]

    def _project(self, x):
        return np.clip(x, self.lower, self.upper), False, TieRule.NONE

    def to_dict(self):
        return {"kind": self.kind, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class PointCloud(SetSpec):
    points: np.ndarray

    kind = "cloud"
    convex = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise GeometryError("point cloud needs a nonempty (k, n) array of points")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("point cloud has non-finite entries")
        object.__setattr__(self, "points", _frozen(pts))
        # a single point is convex
        object.__setattr__(self, "convex", pts.shape[0] == 1)

    @property
    def dim(self):
        return self.points.shape[1]

    def _project(self, x):
        sq = np.sum((self.points - x) ** 2, axis=1)
        i = int(np.argmin(sq))
        ties = np.flatnonzero(sq <= sq[i] + _TIE_RTOL * max(sq[i], 1e-300))
        if ties.size > 1:
            return self.points[ties[0]].copy(), True, TieRule.LOWEST_INDEX
        return self.points[i].copy(), False, TieRule.NONE

    def to_dict(self):
        return {"kind": self.kind, "points": self.points.tolist()}


CONVEX_KINDS = ("affine", "hyperplane", "halfspace", "ball", "box")
AFFINE_KINDS = ("affine", "hyperplane")


def _check(S, x):
    return as_point(x, dim=S.dim)


def project(S: SetSpec, x) -> ProjectionOutcome:
    """Deterministic metric projection of `x` onto `S`."""
    p, multi, rule = S._project(_check(S, x))
    return ProjectionOutcome(p, multi, rule)


def reflect(S: SetSpec, x) -> np.ndarray:
    """``2 P_S x - x`` using the same selection as :func:`project`."""
    x = _check(S, x)
    return 2.0 * S._project(x)[0] - x


def distance(S: SetSpec, x) -> float:
    x = _check(S, x)
    return float(np.linalg.norm(x - S._project(x)[0]))


def contains(S: SetSpec, x, tol=MEMBERSHIP_TOL) -> bool:
    if tol < 0:
        raise GeometryError("tol must be nonnegative")
    return distance(S, x) <= tol


def tangent_space(S: SetSpec, anchor, tol=1e-8) -> AffineSubspace:
    """Translated tangent space ``T_S(anchor) + anchor``.

    Only defined where the tangent cone is a linear subspace: anywhere on an
    affine set or sphere, and at interior points of balls, halfspaces and
    boxes (box coordinates with ``lower == upper`` pin that coordinate).
    """
    anchor = _check(S, anchor)
    if not contains(S, anchor, tol):
        raise GeometryError("anchor is not in the set")
    n = S.dim
    if isinstance(S, AffineSubspace):
        return S
    if isinstance(S, Hyperplane):
        return AffineSubspace(anchor, _complement_rows(S.normal[None, :], n))
    if isinstance(S, Sphere):
        normal = anchor - S.center
        return AffineSubspace(anchor, _complement_rows(normal[None, :] / np.linalg.norm(normal), n))
    if isinstance(S, Ball):
        if np.linalg.norm(anchor - S.center) < S.radius:
            return AffineSubspace.whole_space(anchor)
        raise UnsupportedTangentError("tangent cone on the ball boundary is a halfspace")
    if isinstance(S, Halfspace):
        if S.normal @ anchor < S.offset:
            return AffineSubspace.whole_space(anchor)
        raise UnsupportedTangentError("tangent cone on the halfspace boundary is a halfspace")
    if isinstance(S, Box):
        fixed = S.lower == S.upper
        free = (anchor > S.lower) & (anchor < S.upper)
        if np.all(fixed | free):
            return AffineSubspace(anchor, np.eye(n)[free])
        raise UnsupportedTangentError("tangent cone at a box face is not a subspace")
    raise UnsupportedTangentError(f"tangent spaces are not supported for {S.kind!r} sets")


def shapiro_constant(tangent) -> float:
    """Norm of ``A^T (A A^T)^{-1} A`` for the constraint matrix ``A``.

    `tangent` is an :class:`AffineSubspace` (its constraint rows are used) or
    the constraint matrix itself.  An empty ``A`` (whole space) gives 0.
    """
    A = tangent.constraints if isinstance(tangent, AffineSubspace) else np.asarray(tangent, dtype=float)
    A = np.atleast_2d(A)
    if A.size == 0:
        return 0.0
    if np.linalg.matrix_rank(A) < A.shape[0]:
        raise GeometryError("constraint matrix must have full row rank")
    proj = A.T @ np.linalg.solve(A @ A.T, A)
    return float(np.linalg.norm(proj, 2))


_KINDS = {
    "affine": AffineSubspace,
    "hyperplane": Hyperplane,
    "halfspace": Halfspace,
    "ball": Ball,
    "sphere": Sphere,
    "box": Box,
    "cloud": PointCloud,
}


def set_from_dict(d: dict) -> SetSpec:
    """Build a set from its JSON form (see ``SetSpec.to_dict``)."""
    try:
        kind = d["kind"]
    except (KeyError, TypeError):
        raise GeometryError("set entry needs a 'kind' field") from None
    if kind not in _KINDS:
        raise GeometryError(f"unknown set kind {kind!r}")
    try:
        if kind == "affine":
            if "A" in d:
                return AffineSubspace.from_constraints(d["A"], d["b"])
            return AffineSubspace(d["anchor"], d.get("basis", []))
        if kind in ("hyperplane", "halfspace"):
            return _KINDS[kind](d["normal"], d["offset"])
        if kind in ("ball", "sphere"):
            return _KINDS[kind](d["center"], d["radius"])
        if kind == "box":
            return Box(d["lower"], d["upper"])
        return PointCloud(d["points"])
    except KeyError as exc:
        raise GeometryError(f"{kind} set is missing field {exc.args[0]!r}") from None
