"""Relaxed Douglas-Rachford maps and the cyclic compositions built from them.

The two-set operator with inner set ``A_i`` and outer set ``A_j`` is

    T_{i,j} = (lam/2) (R_i R_j + Id) + (1 - lam) P_j

and the cyclic operator on ``[A_1, ..., A_m]`` (with ``A_{m+1} = A_1``) is
``T = T_{1,2} o T_{2,3} o ... o T_{m,m+1}``.  Compositions are applied
rightmost-first: ``T_{m,m+1}`` acts on the input, ``T_{1,2}`` acts last.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .geometry import GeometryError, SetSpec, as_point, set_from_dict

__all__ = [
    "PairDROp",
    "CycleOp",
    "StepRecord",
    "pair_dr_apply",
    "pair_dr_apply_alt",
    "cycle_apply",
    "cyclic_projections_apply",
    "extended_cp_apply",
]


def _check_lambda(lam):
    if isinstance(lam, (bool, np.bool_)) or not isinstance(lam, Real):
        raise GeometryError("lambda must be a single real number in [0, 1]")
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise GeometryError(f"lambda must lie in [0, 1], got {lam}")
    return lam


@dataclass(frozen=True, eq=False)
class PairDROp:
    inner: SetSpec
    outer: SetSpec
    lam: float

    def __post_init__(self):
        if self.inner.dim != self.outer.dim:
            raise GeometryError("inner and outer sets have different dimensions")
        object.__setattr__(self, "lam", _check_lambda(self.lam))

    @property
    def dim(self):
        return self.outer.dim


@dataclass(frozen=True, eq=False)
class CycleOp:
    sets: tuple
    lam: float

    def __post_init__(self):
        sets = tuple(self.sets)
        if len(sets) < 2:
            raise GeometryError("a cycle needs at least two sets")
        if len({S.dim for S in sets}) != 1:
            raise GeometryError("all sets in a cycle must share the ambient dimension")
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "lam", _check_lambda(self.lam))

    @property
    def m(self):
        return len(self.sets)

    @property
    def dim(self):
        return self.sets[0].dim

    def pair(self, j):
        """``T_{j,j+1}`` for 1-based ``j`` with the cycle wrap ``A_{m+1} = A_1``."""
        return PairDROp(self.sets[j - 1], self.sets[j % self.m], self.lam)

    def to_dict(self):
        return {"lambda": self.lam, "sets": [S.to_dict() for S in self.sets]}

    @classmethod
    def from_dict(cls, d):
        return cls([set_from_dict(s) for s in d["sets"]], d["lambda"])


@dataclass
class StepRecord:
    """One application of the cyclic operator.

    `intermediates` lists ``(label, point)`` in evaluation order:
    ``x_{m+1}`` (the input), then for ``j = m, ..., 1`` the reflection
    ``y_{j+1} = R_{A_{j+1}} x_{j+1}`` followed by ``x_j = T_{j,j+1} x_{j+1}``.
    """

    input: np.ndarray
    output: np.ndarray
    intermediates: list = field(default_factory=list)
    multivalued_hit: bool = False

    def lookup(self, label):
        for name, pt in self.intermediates:
            if name == label:
                return pt
        raise KeyError(label)

    @property
    def m(self):
        return (len(self.intermediates) - 1) // 2

    @property
    def chain_x(self):
        """``[x_{m+1}, x_m, ..., x_1]``."""
        return [self.lookup(f"x_{j}") for j in range(self.m + 1, 0, -1)]

    @property
    def chain_y(self):
        """``[y_2, ..., y_{m+1}]``."""
        return [self.lookup(f"y_{j}") for j in range(2, self.m + 2)]


def _pair_parts(inner, outer, lam, x):
    """Unchecked pair step.

    Returns ``(out, p_outer, r_outer, p_inner_r, multivalued)`` with
    ``p_outer = P_j x``, ``r_outer = R_j x`` and ``p_inner_r = P_i R_j x``.
    """
    pj, mv1, _ = outer._project(x)
    rj = 2.0 * pj - x
    pirj, mv2, _ = inner._project(rj)
    rirj = 2.0 * pirj - rj
    out = 0.5 * lam * (rirj + x) + (1.0 - lam) * pj
    return out, pj, rj, pirj, mv1 or mv2


def pair_dr_apply(op: PairDROp, x) -> np.ndarray:
    """``(lam/2)(R_i R_j x + x) + (1 - lam) P_j x``."""
    x = as_point(x, dim=op.dim)
    return _pair_parts(op.inner, op.outer, op.lam, x)[0]


def pair_dr_apply_alt(op: PairDROp, x) -> np.ndarray:
    """Same map written as ``lam P_i R_j x + (1 - 2 lam) P_j x + lam x``."""
    x = as_point(x, dim=op.dim)
    lam = op.lam
    pj = op.outer._project(x)[0]
    pirj = op.inner._project(2.0 * pj - x)[0]
    return lam * pirj + (1.0 - 2.0 * lam) * pj + lam * x


def _cycle(sets, lam, x, record):
    m = len(sets)
    inter = [(f"x_{m + 1}", x)] if record else None
    hit = False
    cur = x
    for j in range(m, 0, -1):
        out, _, rj, _, mv = _pair_parts(sets[j - 1], sets[j % m], lam, cur)
        hit = hit or mv
        if record:
            inter.append((f"y_{j + 1}", rj))
            inter.append((f"x_{j}", out))
        cur = out
    return cur, inter, hit


def cycle_apply(op: CycleOp, x) -> StepRecord:
    x = as_point(x, dim=op.dim)
    out, inter, hit = _cycle(op.sets, op.lam, x, True)
    return StepRecord(x, out, inter, hit)


def _project_chain(sets, order, x):
    for i in order:
        x = sets[i]._project(x)[0]
    return x


def _check_sets(sets, x):
    sets = list(sets)
    if not sets:
        raise GeometryError("need at least one set")
    return sets, as_point(x, dim=sets[0].dim)


def cyclic_projections_apply(sets, x) -> np.ndarray:
    """``P_{A_2} o ... o P_{A_m} o P_{A_1}`` applied to `x` (``P_{A_1}`` first)."""
    sets, x = _check_sets(sets, x)
    m = len(sets)
    return _project_chain(sets, [0] + list(range(m - 1, 0, -1)), x)


def extended_cp_apply(sets, x) -> np.ndarray:
    """``P_{A_1} o P_{A_2} o ... o P_{A_m} o P_{A_1}`` applied to `x`."""
    sets, x = _check_sets(sets, x)
    m = len(sets)
    return _project_chain(sets, [0] + list(range(m - 1, 0, -1)) + [0], x)


def _gap_chain(sets, y):
    """``[P_{A_1} y, then P_{A_m}, ..., P_{A_1}]`` applied successively."""
    m = len(sets)
    chain = [sets[0]._project(y)[0]]
    for i in range(m - 1, -1, -1):
        chain.append(sets[i]._project(chain[-1])[0])
    return chain


def _gap_total(sets, y):
    chain = _gap_chain(sets, y)
    return sum(float(np.linalg.norm(a - b)) for a, b in zip(chain[:-1], chain[1:]))
