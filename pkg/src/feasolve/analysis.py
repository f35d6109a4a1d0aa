"""Fixed-point characterization, shadow checks and the regularity/rate calculus.

Fixed points of the cyclic relaxed Douglas-Rachford map are described through
the chain ``x_{m+1} = x``, ``x_j = T_{j,j+1} x_{j+1}``,
``y_{j+1} = R_{A_{j+1}} x_{j+1}``.  For ``lam < 1`` a point is fixed exactly
when it equals

    sum_j [ lam^j P_{A_j} y_{j+1} + (1 - 2 lam) lam^(j-1) P_{A_{j+1}} x_{j+1} ] / (1 - lam^m)

and for ``lam = 1`` exactly when
``P_{A_1} x = sum_j P_{A_j} y_{j+1} - sum_{j<m} P_{A_{j+1}} x_{j+1}``.

The remaining functions are closed-form constants: violations of projectors
and reflectors of eps-super-regular sets, their propagation through pair and
cyclic compositions, linear-gauge contraction factors, and the error budget
for replacing projectors by projectors onto translated tangent spaces.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .engine import residual
from .geometry import (
    AFFINE_KINDS,
    AffineSubspace,
    GeometryError,
    SetSpec,
    as_point,
    shapiro_constant,
    tangent_space,
)
from .operators import CycleOp, _cycle, _pair_parts, cycle_apply, extended_cp_apply

__all__ = [
    "BudgetRangeError",
    "FixCharacterizationReport",
    "AffineShadowReport",
    "ProjectorViolations",
    "RegularityBudget",
    "AffineMap",
    "AffineApproxBudget",
    "AlmostFixedShadowReport",
    "characterize_fixed_point",
    "coefficient_table",
    "verify_shadow_affine",
    "projector_violations",
    "pair_violation",
    "compose_fne",
    "cycle_budget",
    "linear_gauge",
    "linear_rate_bound",
    "gauge_iterate",
    "regularity_budget",
    "affine_compose",
    "approx_radius",
    "shadow_error_budget",
    "affine_approx_budget",
    "verify_shadow_almost_fixed",
]

COEFF_NEG_TOL = 1e-12
MEMBER_TOL = 1e-10


class BudgetRangeError(ValueError):
    """A constant fell outside the range where its formula applies."""


# -- fixed-point characterization -------------------------------------------


def coefficient_table(lam: float, m: int):
    """Interleaved weights ``[c^P_1, c^Q_1, ..., c^P_m, c^Q_m]`` and their sum.

    ``c^P_j = lam^j / (1 - lam^m)`` weighs ``P_{A_j} y_{j+1}`` and
    ``c^Q_j = (1 - 2 lam) lam^(j-1) / (1 - lam^m)`` weighs ``P_{A_{j+1}} x_{j+1}``.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if not 0.0 <= lam < 1.0:
        raise ValueError("lambda must lie in [0, 1); use the lambda = 1 identity instead")
    denom = 1.0 - lam**m
    coeffs = []
    for j in range(1, m + 1):
        coeffs.append(lam**j / denom)
        coeffs.append((1.0 - 2.0 * lam) * lam ** (j - 1) / denom)
    return coeffs, math.fsum(coeffs)


@dataclass
class FixCharacterizationReport:
    chain_x: list
    chain_y: list
    coefficients: list
    coefficient_sum: float
    representation_residual: float
    is_fixed: bool
    convex_combination: bool
    multivalued_hit: bool
    branch: str
    p_terms: list = field(default_factory=list)
    p_terms_in_sets: bool = True

    @property
    def in_convex_hull(self):
        """Certified membership in the convex hull of the union of the sets."""
        return self.branch == "M1" and self.convex_combination and self.p_terms_in_sets

    def digest(self):
        return {
            "branch": self.branch,
            "is_fixed": self.is_fixed,
            "coefficient_sum": self.coefficient_sum,
            "representation_residual": self.representation_residual,
            "convex_combination": self.convex_combination,
            "p_terms_in_sets": self.p_terms_in_sets,
            "in_convex_hull": self.in_convex_hull,
            "multivalued_hit": self.multivalued_hit,
        }


def characterize_fixed_point(sets, lam, x, tol=1e-8) -> FixCharacterizationReport:
    """Evaluate the 2m-point representation of `x` built from its own chain.

    ``is_fixed`` compares ``x_1`` with ``x``; ``representation_residual`` is the
    distance between ``x`` and the representation (``lam < 1``) or between the
    two sides of the ``lam = 1`` identity.  Each ``P``-term is also checked for
    membership in its set, which together with nonnegative weights places
    ``x`` in the convex hull of the union of the sets.
    """
    op = CycleOp(sets, lam)
    sets, m = op.sets, op.m
    rec = cycle_apply(op, x)
    x = rec.input
    xs = {j: rec.lookup(f"x_{j}") for j in range(1, m + 2)}
    ys = {j: rec.lookup(f"y_{j}") for j in range(2, m + 2)}

    # P_{A_j} y_{j+1} and P_{A_{j+1}} x_{j+1}, interleaved
    p_terms = []
    for j in range(1, m + 1):
        p_terms.append((j, sets[j - 1]._project(ys[j + 1])[0]))
        p_terms.append((j % m + 1, sets[j % m]._project(xs[j + 1])[0]))
    in_sets = all(sets[i - 1].contains(p, MEMBER_TOL) for i, p in p_terms)

    if op.lam < 1.0:
        coeffs, csum = coefficient_table(op.lam, m)
        rep = sum(c * p for c, (_, p) in zip(coeffs, p_terms))
        rep_res = float(np.linalg.norm(x - rep))
        convex = all(c >= -COEFF_NEG_TOL for c in coeffs)
        branch = "M1"
    else:
        # the last Q-term is P_{A_1} x itself and sits on the left-hand side
        coeffs = [1.0, -1.0] * m
        csum = 0.0
        lhs = sets[0]._project(x)[0]
        rhs = sum(c * p for c, (_, p) in zip(coeffs[:-1], p_terms[:-1]))
        rep_res = float(np.linalg.norm(lhs - rhs))
        convex = False
        branch = "M2"
    return FixCharacterizationReport(
        chain_x=rec.chain_x,
        chain_y=rec.chain_y,
        coefficients=coeffs,
        coefficient_sum=csum,
        representation_residual=rep_res,
        is_fixed=bool(np.linalg.norm(xs[1] - x) <= tol),
        convex_combination=convex,
        multivalued_hit=rec.multivalued_hit,
        branch=branch,
        p_terms=p_terms,
        p_terms_in_sets=in_sets,
    )


@dataclass(frozen=True)
class AffineShadowReport:
    shadow: np.ndarray
    cp_residual: float
    extended_cp_image_fixed: bool
    cdr0_shadow_fixed: bool
    holds: bool

    def digest(self):
        return {
            "cp_residual": self.cp_residual,
            "shadow_fixed": self.holds,
            "extended_cp_image_fixed": self.extended_cp_image_fixed,
            "cdr0_shadow_fixed": self.cdr0_shadow_fixed,
        }


def _require_affine(sets):
    for S in sets:
        if S.kind not in AFFINE_KINDS:
            raise GeometryError(f"affine shadow check needs affine sets, got {S.kind!r}")


def verify_shadow_affine(affine_sets, lam, x_fixed, tol=1e-10) -> AffineShadowReport:
    """For affine sets, check that shadows of fixed points are extended-CP fixed points.

    Three images of ``x_fixed`` are tested for being fixed by the extended
    cyclic projection map ``P_1 P_2 ... P_m P_1`` (within ``10 * tol``): its
    shadow ``P_1 x``, its extended-CP image, and ``P_1`` applied to the
    cyclic-projection image.
    """
    sets = list(affine_sets)
    _require_affine(sets)
    op = CycleOp(sets, lam)
    x = as_point(x_fixed, dim=op.dim, name="x_fixed")
    if residual(op, x) > tol:
        raise ValueError("x_fixed is not a fixed point within tol")

    def ecp_res(z):
        return float(np.linalg.norm(z - extended_cp_apply(sets, z)))

    shadow = sets[0]._project(x)[0]
    cp_res = ecp_res(shadow)
    image = extended_cp_apply(sets, x)
    cdr0 = sets[0]._project(_cycle(sets, 0.0, x, False)[0])[0]
    bound = 10.0 * tol
    return AffineShadowReport(
        shadow=shadow,
        cp_residual=cp_res,
        extended_cp_image_fixed=ecp_res(image) <= bound,
        cdr0_shadow_fixed=ecp_res(cdr0) <= bound,
        holds=cp_res <= bound,
    )


# -- violation and rate calculus --------------------------------------------

PROJECTOR_EPS_LIMIT = 2.0 * math.sqrt(3.0) / 3.0 - 1.0
REFLECTOR_EPS_LIMIT = 4.0 * math.sqrt(2.0) / 7.0 - 5.0 / 7.0


@dataclass(frozen=True)
class ProjectorViolations:
    eps_hat: float
    eps_check: float
    eps_tilde: float
    projector_valid: bool
    reflector_valid: bool


def projector_violations(eps_U: float) -> ProjectorViolations:
    """Violations of ``P`` (nonexpansive ``eps_hat``, fne ``eps_check``) and ``R`` (``eps_tilde``)."""
    if not 0.0 <= eps_U < 1.0:
        raise BudgetRangeError(f"projector_violations: eps_U={eps_U} must lie in [0, 1) (upper bound 1)")
    q = (1.0 - eps_U) ** 2
    return ProjectorViolations(
        eps_hat=4.0 * eps_U / q,
        eps_check=4.0 * eps_U * (1.0 + eps_U) / q,
        eps_tilde=8.0 * eps_U * (1.0 + eps_U) / q,
        projector_valid=eps_U < PROJECTOR_EPS_LIMIT,
        reflector_valid=eps_U < REFLECTOR_EPS_LIMIT,
    )


def pair_violation(lam: float, eps_tilde_i: float, eps_tilde_j: float) -> float:
    """Violation of ``T_{i,j}`` from the reflector violations of inner and outer sets."""
    if not 0.0 <= lam <= 1.0:
        raise BudgetRangeError("pair_violation: lambda must lie in [0, 1]")
    if eps_tilde_i < 0 or eps_tilde_j < 0:
        raise BudgetRangeError("pair_violation: reflector violations must be >= 0")
    a = lam * math.sqrt(1.0 + eps_tilde_i) + 1.0 - lam
    return max(0.0, 0.5 * (a * a * (1.0 + eps_tilde_j) - 1.0))


def compose_fne(alphas, violations):
    """Averaging constant and violation of a composition of a-alpha-fne maps."""
    alphas, violations = list(alphas), list(violations)
    if not alphas or len(alphas) != len(violations):
        raise ValueError("alphas and violations must be nonempty and of equal length")
    m = len(alphas)
    alpha = m / (m - 1 + 1.0 / max(alphas))
    eps = math.prod(1.0 + e for e in violations) - 1.0
    return alpha, eps


def cycle_budget(pair_violations, m: int):
    """``(alpha, eps)`` of the cyclic map from the ``m`` pair violations."""
    pv = list(pair_violations)
    if m < 2:
        raise ValueError("m must be >= 2")
    if len(pv) != m:
        raise ValueError(f"expected {m} pair violations, got {len(pv)}")
    if any(e < 0 for e in pv):
        raise BudgetRangeError("cycle_budget: pair violations must be >= 0")
    return compose_fne([0.5] * m, pv)


def _contraction(alpha, eps, kappa, what):
    if not 0.0 < alpha < 1.0:
        raise BudgetRangeError(f"{what}: alpha must lie in (0, 1)")
    if eps < 0:
        raise BudgetRangeError(f"{what}: eps must be nonnegative")
    if not kappa > 0:
        raise BudgetRangeError(f"{what}: kappa must be positive")
    w = (1.0 - alpha) / alpha
    lower = math.sqrt(w / (1.0 + eps))
    upper = math.sqrt(w / eps) if eps > 0 else math.inf
    if kappa < lower * (1.0 - 1e-15):
        raise BudgetRangeError(f"{what}: kappa={kappa} is below the lower bound {lower}")
    if kappa >= upper:
        raise BudgetRangeError(f"{what}: kappa={kappa} is not below the upper bound {upper}")
    gamma = math.sqrt(max(0.0, 1.0 + eps - w / (kappa * kappa)))
    if gamma >= 1.0:
        raise BudgetRangeError(f"{what}: kappa={kappa} is not below the upper bound {upper} (gamma rounds to 1)")
    return gamma


def linear_gauge(alpha: float, eps: float, kappa: float) -> float:
    """Contraction ``gamma`` of the linear gauge ``theta(t) = gamma t``."""
    return _contraction(alpha, eps, kappa, "linear_gauge")


def linear_rate_bound(alpha_bar: float, eps_bar: float, kappa_bar: float) -> float:
    """R-linear rate bound ``c_bar`` for the cyclic iteration."""
    return _contraction(alpha_bar, eps_bar, kappa_bar, "linear_rate_bound")


def gauge_iterate(gamma: float, t0: float, k: int):
    """``[gamma t0, gamma^2 t0, ..., gamma^k t0]``."""
    if not 0.0 <= gamma < 1.0:
        raise BudgetRangeError("gauge_iterate: gamma must lie in [0, 1) for the iterates to be summable")
    if not t0 > 0 or k < 1:
        raise ValueError("need t0 > 0 and k >= 1")
    out, t = [], t0
    for _ in range(k):
        t = gamma * t
        out.append(t)
    return out


@dataclass(frozen=True)
class RegularityBudget:
    eps_U: list
    eps_hat: list
    eps_check: list
    eps_tilde: list
    pair_violations: list
    composite_eps: float
    composite_alpha: float
    kappa: float
    gauge_gamma: float
    rate_bound: float
    lam: float

    def to_dict(self):
        return asdict(self)


def regularity_budget(eps_U, lam: float, kappa: float) -> RegularityBudget:
    """Chain the set constants ``eps_U`` (one per set) through to the rate bound."""
    eps_U = [float(e) for e in eps_U]
    m = len(eps_U)
    pvs = [projector_violations(e) for e in eps_U]
    tilde = [p.eps_tilde for p in pvs]
    pair = [pair_violation(lam, tilde[j], tilde[(j + 1) % m]) for j in range(m)]
    alpha, eps = cycle_budget(pair, m)
    gamma = linear_gauge(alpha, eps, kappa)
    rate = linear_rate_bound(alpha, eps, kappa)
    return RegularityBudget(
        eps_U=eps_U,
        eps_hat=[p.eps_hat for p in pvs],
        eps_check=[p.eps_check for p in pvs],
        eps_tilde=tilde,
        pair_violations=pair,
        composite_eps=eps,
        composite_alpha=alpha,
        kappa=float(kappa),
        gauge_gamma=gamma,
        rate_bound=rate,
        lam=float(lam),
    )


# -- affine approximation budget --------------------------------------------


@dataclass(frozen=True)
class AffineMap:
    """``w -> linear @ w + offset``."""

    linear: np.ndarray
    offset: np.ndarray

    def __call__(self, w):
        return self.linear @ w + self.offset

    def ball_sup(self):
        """``|offset| + sigma_max(linear)``, an upper bound on ``sup_{|w|<=1} |Phi w|``."""
        return float(np.linalg.norm(self.offset) + np.linalg.norm(self.linear, 2))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), np.zeros(n))

    @classmethod
    def projector(cls, L: AffineSubspace):
        lin, off = L.linear_projector()
        return cls(lin, off)


def affine_compose(maps, eps):
    """Compose affine approximations ``Phi_1, Phi_2, ...`` (``Phi_1`` outermost).

    Returns ``(composed, composed_eps)`` where ``composed[i]`` is
    ``Phi_{1..i+1}`` and ``composed_eps[i + 1] = composed_eps[i] +
    eps[i + 1] * sup_{|w|<=1} |Phi_{1..i+1} w|``.
    """
    maps, eps = list(maps), [float(e) for e in eps]
    if not maps or len(maps) != len(eps):
        raise ValueError("maps and eps must be nonempty and of equal length")
    if any(not 0.0 < e < 1.0 for e in eps):
        raise BudgetRangeError("affine_compose: each eps must lie in (0, 1)")
    composed, ceps = [maps[0]], [eps[0]]
    for phi, e in zip(maps[1:], eps[1:]):
        prev = composed[-1]
        # (1 - e) * prev(phi(w) / (1 - e)) = prev.L phi.L w + prev.L phi.c + (1 - e) prev.c
        composed.append(AffineMap(prev.linear @ phi.linear, prev.linear @ phi.offset + (1.0 - e) * prev.offset))
        ceps.append(ceps[-1] + e * prev.ball_sup())
    return composed, ceps


def approx_radius(eps_U: float, shapiro_k: float, eps_bar_target: float) -> float:
    """Radius of the ball on which the tangent-space projector is `eps_bar_target`-accurate."""
    if not 0.0 <= eps_U < 1.0:
        raise BudgetRangeError("approx_radius: eps_U must lie in [0, 1)")
    if shapiro_k < 0:
        raise BudgetRangeError("approx_radius: shapiro_k must be >= 0")
    if not eps_bar_target > 0:
        raise BudgetRangeError("approx_radius: eps_bar_target must be > 0")
    eps_hat = 4.0 * eps_U / (1.0 - eps_U) ** 2
    return eps_bar_target / (math.sqrt(1.0 + eps_hat) + shapiro_k + 1.0)


def shadow_error_budget(composed_eps) -> float:
    ce = list(composed_eps)
    if not ce:
        raise ValueError("need at least one composed error")
    if any(e <= 0 for e in ce):
        raise BudgetRangeError("shadow_error_budget: composed errors must be > 0")
    return 4.0 * math.fsum(ce)


@dataclass(frozen=True)
class AffineApproxBudget:
    per_set_eps: list
    composed_eps: list
    total_eps: float
    radii: list
    sup_norms: list
    anchors: list = field(default_factory=list)
    shapiro: list = field(default_factory=list)

    def to_dict(self):
        return {
            "per_set_eps": list(self.per_set_eps),
            "composed_eps": list(self.composed_eps),
            "total_eps": self.total_eps,
            "radii": list(self.radii),
            "sup_norms": list(self.sup_norms),
            "anchors": [a.tolist() for a in self.anchors],
            "shapiro": list(self.shapiro),
        }


def default_eps_U(S: SetSpec):
    """``0`` for convex sets; nonconvex sets have no default."""
    if S.convex:
        return 0.0
    raise ValueError(f"eps_U for a {S.kind!r} set must be supplied explicitly")


def affine_approx_budget(sets, anchors, per_set_eps, eps_U=None) -> AffineApproxBudget:
    """Error budget for approximating each ``P_{A_i}`` by ``P_{L_i}``, ``L_i`` tangent at ``anchors[i]``.

    `eps_U` lists the super-regularity constants; ``None`` entries (or a
    missing list) default to 0 for convex sets and raise for nonconvex ones.
    """
    sets = list(sets)
    m = len(sets)
    if len(anchors) != m or len(per_set_eps) != m:
        raise ValueError("need one anchor and one eps per set")
    eps_U = list(eps_U) if eps_U is not None else [None] * m
    if len(eps_U) != m:
        raise ValueError("need one eps_U per set")
    eps_U = [default_eps_U(S) if e is None else float(e) for S, e in zip(sets, eps_U)]
    tangents = [tangent_space(S, a) for S, a in zip(sets, anchors)]
    ks = [shapiro_constant(L) for L in tangents]
    radii = [approx_radius(e, k, eb) for e, k, eb in zip(eps_U, ks, per_set_eps)]
    composed, ceps = affine_compose([AffineMap.projector(L) for L in tangents], per_set_eps)
    return AffineApproxBudget(
        per_set_eps=[float(e) for e in per_set_eps],
        composed_eps=ceps,
        total_eps=shadow_error_budget(ceps),
        radii=radii,
        sup_norms=[phi.ball_sup() for phi in composed],
        anchors=[L.anchor for L in tangents],
        shapiro=ks,
    )


@dataclass(frozen=True)
class AlmostFixedShadowReport:
    eps_budget: float
    observed_residual: float
    holds: bool
    within_neighborhoods: bool

    def digest(self):
        return asdict(self)


def verify_shadow_almost_fixed(sets, lam, x_fixed, budget: AffineApproxBudget, tol=1e-8) -> AlmostFixedShadowReport:
    """Compare the extended-CP residual of the shadow of `x_fixed` with the budget.

    ``within_neighborhoods`` reports whether the points the estimate relies on
    (``x_i``, ``P_i R_{i+1} x_{i+1}``, ``R_{i+1} x_{i+1}``, ``P_{i+1} x_{i+1}``)
    lie in the balls ``B(anchor_i, r_i)``; it does not affect ``holds``.
    """
    op = CycleOp(sets, lam)
    sets, m = op.sets, op.m
    x = as_point(x_fixed, dim=op.dim, name="x_fixed")
    if residual(op, x) > tol:
        raise ValueError("x_fixed is not a fixed point within tol")
    for S in sets:
        if S.kind not in ("affine", "hyperplane", "sphere"):
            raise GeometryError(f"no tangent-space approximation for {S.kind!r} sets")
    shadow = sets[0]._project(x)[0]
    observed = float(np.linalg.norm(shadow - extended_cp_apply(sets, shadow)))

    inside = True
    cur = x
    chain = {m + 1: x}
    for j in range(m, 0, -1):
        cur, pj, rj, pirj, _ = _pair_parts(sets[j - 1], sets[j % m], op.lam, cur)
        chain[j] = cur
        c, r = budget.anchors[j - 1], budget.radii[j - 1]
        for pt in (cur, pirj, rj, pj):
            inside = inside and float(np.linalg.norm(pt - c)) < r
    return AlmostFixedShadowReport(
        eps_budget=budget.total_eps,
        observed_residual=observed,
        holds=observed <= budget.total_eps,
        within_neighborhoods=inside,
    )
