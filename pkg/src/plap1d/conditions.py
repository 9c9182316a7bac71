"""Sufficient-condition inequalities and the tau ranges they make feasible.

Each checker evaluates one printed inequality with exact piecewise-polynomial
integrals and the eigenvalue supplied by the caller, and reports the numbers
it compared so downstream code can apply its own slack.  Comparisons are the
printed ones: strict where the source inequality is strict, non-strict
otherwise, in plain IEEE arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core_types import EpsTooLargeError, Interval, Problem, Weight
from .eigen import EigenPair

CONDITION_NAMES = ("thm1_i", "thm1_ii", "thm2_i", "thm2_ii", "cor")

TAU_CAP_FACTOR = 1e6


@dataclass
class ConditionReport:
    """Outcome of one sufficient condition.

    lhs/rhs are the binding part for two-part conditions; every part's numbers
    sit in auxiliary under its own keys.  holds is false whenever the
    condition is not applicable, with reason saying why.
    """

    name: str
    holds: bool
    lhs: float
    rhs: float
    margin: float
    applicable: bool
    reason: str
    lambda1: float
    gamma: float
    auxiliary: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TauInterval:
    lo: float
    hi: float
    eps: float

    def __post_init__(self):
        if not 0.0 < self.lo <= self.hi:
            raise ValueError(f"invalid tau interval [{self.lo}, {self.hi}]")


def gamma(domain: Interval, window: Interval) -> float:
    """max of the two overlapping reach lengths, max(x1 - a, b - x0)."""
    return max(window.b - domain.a, domain.b - window.a)


def c_pq(p: float, q: float) -> float:
    """(p/(p-1-q))^{p-1} * (p-1)(q+1)/(p-1-q); blows up as q -> p-1."""
    if p <= 1.0:
        raise ValueError(f"invalid exponent: p must be > 1, got {p}")
    if not 0.0 < q < p - 1.0:
        raise ValueError(
            f"invalid exponent: q must lie in (0, p-1) = (0, {p - 1}), got {q}"
        )
    d = p - 1.0 - q
    return (p / d) ** (p - 1.0) * (p - 1.0) * (q + 1.0) / d


def _side_masses(m: Weight, eps: float, x0: float, x1: float):
    """Exact one-sided negative-mass data at inflation eps.

    Returns (M_a(x1), int_a^{x1} M_a, M_b(x0), int_{x0}^b M_b) where
    M_a(y) = int_a^y (m^- + eps) and M_b(z) = int_z^b (m^- + eps).
    """
    F = m.neg_part().affine(1.0, eps).antiderivative()
    G = F.antiderivative()
    a, b = m.domain.a, m.domain.b
    Ma = float(F(x1))
    Ia = float(G(x1) - G(a))
    total = float(F(b))
    Mb = total - float(F(x0))
    Ib = total * (b - x0) - float(G(b) - G(x0))
    return Ma, Ia, Mb, Ib


def m_script(p: float, m: Weight, domain: Interval, x0: float, x1: float) -> float:
    """max over the two sides of M^-(edge)^{2-p} (int M^-)^{p-1}, at eps = 0.

    The window is passed as two scalars so degenerate windows (x0 = x1) are
    representable.  A side with no negative mass contributes 0, reading
    0^{2-p} * 0^{p-1} as the limit value 0.
    """
    tol = 1e-12 * domain.length()
    md = m.domain
    if abs(md.a - domain.a) > tol or abs(md.b - domain.b) > tol:
        raise ValueError("weight domain does not match the given domain")
    if not (domain.a - tol <= x0 <= x1 <= domain.b + tol):
        raise ValueError("window edges must satisfy a <= x0 <= x1 <= b")
    Ma, Ia, Mb, Ib = _side_masses(m, 0.0, x0, x1)

    def side(mass, integral):
        if mass <= 0.0 or integral <= 0.0:
            return 0.0
        return mass ** (2.0 - p) * integral ** (p - 1.0)

    return max(side(Ma, Ia), side(Mb, Ib))


def _c_sup(prob: Problem) -> float:
    return prob.c_plus.sup_norm()


def _two_part_report(name, parts, applicable, reason, lam1, gam, aux):
    # parts: (label, lhs, rhs, strict); the binding part (smallest normalized
    # margin, ties to the strict one) provides the headline lhs/rhs
    def norm_margin(part):
        _, lhs, rhs, strict = part
        return ((rhs - lhs) / max(1.0, abs(rhs)), not strict)

    for label, lhs, rhs, strict in parts:
        aux[f"{label}_lhs"] = lhs
        aux[f"{label}_rhs"] = rhs
    binding = min(parts, key=norm_margin)
    _, lhs, rhs, strict = binding
    all_hold = all(
        (l < r) if s else (l <= r) for _, l, r, s in parts
    )
    return ConditionReport(
        name=name,
        holds=bool(applicable and all_hold),
        lhs=lhs,
        rhs=rhs,
        margin=rhs - lhs,
        applicable=applicable,
        reason=reason,
        lambda1=lam1,
        gamma=gam,
        auxiliary=aux,
    )


def check_thm1_i(prob: Problem, eig: EigenPair) -> ConditionReport:
    """Power-profile condition for p >= 2, q in (p-2, p-1): parts (i1), (i2)."""
    p, q = prob.p, prob.q
    lam1 = eig.lambda1
    gam = gamma(prob.domain, prob.window)
    applicable = p >= 2.0 and (p - 2.0) < q
    reason = "" if applicable else "requires p >= 2 and q in (p-2, p-1)"
    d = p - 1.0 - q
    M2 = m_script(2.0, prob.m, prob.domain, prob.window.a, prob.window.b)
    i1_lhs = gam ** (p - 2.0) * M2
    i1_rhs = (p - 1.0) / (d ** (p - 1.0) * lam1)
    i2_lhs = gam**p * _c_sup(prob)
    i2_rhs = (2.0 - p + q) * (p - 1.0) / d**p
    aux = {"M_2": M2}
    return _two_part_report(
        "thm1_i",
        [("i1", i1_lhs, i1_rhs, True), ("i2", i2_lhs, i2_rhs, False)],
        applicable,
        reason,
        lam1,
        gam,
        aux,
    )


def check_thm1_ii(prob: Problem, eig: EigenPair) -> ConditionReport:
    """Power-profile condition for 1 < p <= 2: parts (i3), (i4)."""
    p, q = prob.p, prob.q
    lam1 = eig.lambda1
    gam = gamma(prob.domain, prob.window)
    applicable = 1.0 < p <= 2.0
    reason = "" if applicable else "requires p <= 2"
    d = p - 1.0 - q
    Mp = m_script(p, prob.m, prob.domain, prob.window.a, prob.window.b)
    i3_lhs = Mp
    i3_rhs = (p - 1.0) ** p / (d ** (p - 1.0) * lam1)
    i4_lhs = gam**p * _c_sup(prob)
    i4_rhs = ((p - 1.0) / d) ** p * q
    aux = {"M_p": Mp}
    return _two_part_report(
        "thm1_ii",
        [("i3", i3_lhs, i3_rhs, True), ("i4", i4_lhs, i4_rhs, False)],
        applicable,
        reason,
        lam1,
        gam,
        aux,
    )


def _hyperbolic_report(name, prob, eig, profile, applicable_extra, reason_extra):
    p = prob.p
    lam1 = eig.lambda1
    gam = gamma(prob.domain, prob.window)
    cn = _c_sup(prob)
    C = c_pq(p, prob.q)
    aux = {"C_pq": C}
    if cn == 0.0:
        return ConditionReport(
            name=name,
            holds=False,
            lhs=math.nan,
            rhs=1.0 / lam1,
            margin=math.nan,
            applicable=False,
            reason="c vanishes; use the c-free condition",
            lambda1=lam1,
            gamma=gam,
            auxiliary=aux,
        )
    applicable = applicable_extra
    reason = reason_extra if not applicable else ""
    lt = (cn / C) ** (1.0 / p)
    mminus = prob.m.neg_part().sup_norm()
    lhs = (mminus / cn) * profile(lt * gam) ** p
    rhs = 1.0 / lam1
    aux.update({"lambda_tilde": lt, "m_minus_sup": mminus, "c_sup": cn})
    return ConditionReport(
        name=name,
        holds=bool(applicable and lhs <= rhs),
        lhs=lhs,
        rhs=rhs,
        margin=rhs - lhs,
        applicable=applicable,
        reason=reason,
        lambda1=lam1,
        gamma=gam,
        auxiliary=aux,
    )


def check_thm2_i(prob: Problem, eig: EigenPair) -> ConditionReport:
    """sinh-profile condition, p >= 2 with c not identically zero."""
    return _hyperbolic_report(
        "thm2_i", prob, eig, math.sinh, prob.p >= 2.0, "requires p >= 2"
    )


def check_thm2_ii(prob: Problem, eig: EigenPair) -> ConditionReport:
    """exp-profile condition, any p > 1 with c not identically zero."""
    return _hyperbolic_report("thm2_ii", prob, eig, math.expm1, True, "")


def check_cor(prob: Problem, eig: EigenPair) -> ConditionReport:
    """c-free condition: ||m^-|| gamma^p / C_pq <= 1/lambda1."""
    p = prob.p
    lam1 = eig.lambda1
    gam = gamma(prob.domain, prob.window)
    C = c_pq(p, prob.q)
    aux = {"C_pq": C}
    if _c_sup(prob) > 0.0:
        return ConditionReport(
            name="cor",
            holds=False,
            lhs=math.nan,
            rhs=1.0 / lam1,
            margin=math.nan,
            applicable=False,
            reason="requires c identically zero",
            lambda1=lam1,
            gamma=gam,
            auxiliary=aux,
        )
    mminus = prob.m.neg_part().sup_norm()
    lhs = mminus * gam**p / C
    rhs = 1.0 / lam1
    aux["m_minus_sup"] = mminus
    return ConditionReport(
        name="cor",
        holds=bool(lhs <= rhs),
        lhs=lhs,
        rhs=rhs,
        margin=rhs - lhs,
        applicable=True,
        reason="",
        lambda1=lam1,
        gamma=gam,
        auxiliary=aux,
    )


CHECKERS = {
    "thm1_i": check_thm1_i,
    "thm1_ii": check_thm1_ii,
    "thm2_i": check_thm2_i,
    "thm2_ii": check_thm2_ii,
    "cor": check_cor,
}


def check_all(prob: Problem, eig: EigenPair) -> list[ConditionReport]:
    return [CHECKERS[name](prob, eig) for name in CONDITION_NAMES]


def tau_interval(which: str, prob: Problem, eig: EigenPair, eps: float) -> TauInterval:
    """The tau range the chosen proof admits at negative-mass inflation eps.

    Empty range raises EpsTooLargeError; the caller is expected to shrink eps
    and retry.  The upper end is capped at TAU_CAP_FACTOR times max(lambda1,
    lo) so a problem with no negative mass still gets a finite range.
    """
    if which not in CONDITION_NAMES:
        raise ValueError(f"unknown condition name: {which!r}")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    p, q = prob.p, prob.q
    lam1 = eig.lambda1
    gam = gamma(prob.domain, prob.window)
    d = p - 1.0 - q
    x0, x1 = prob.window.a, prob.window.b

    if which == "thm1_i":
        _, Ia, _, Ib = _side_masses(prob.m, eps, x0, x1)
        lo = lam1
        denom = gam ** (p - 2.0) * (d ** (p - 1.0) / (p - 1.0)) * max(Ia, Ib)
        hi = math.inf if denom == 0.0 else 1.0 / denom
    elif which == "thm1_ii":
        Ma, Ia, Mb, Ib = _side_masses(prob.m, eps, x0, x1)
        M_eps = max(Ma, Mb)
        lo = lam1 * M_eps ** (2.0 - p)
        hi = (p - 1.0) ** p / (d ** (p - 1.0) * max(Ia, Ib) ** (p - 1.0))
    else:
        mminus_eff = max(prob.m.neg_part().sup_norm(), eps)
        lo = lam1
        if which == "cor":
            hi = c_pq(p, q) / (mminus_eff * gam**p)
        else:
            cn = _c_sup(prob)
            if cn == 0.0:
                raise ValueError(f"{which} needs c not identically zero")
            lt = (cn / c_pq(p, q)) ** (1.0 / p)
            grow = math.sinh(lt * gam) if which == "thm2_i" else math.expm1(lt * gam)
            hi = cn / (mminus_eff * grow**p)

    hi = min(hi, TAU_CAP_FACTOR * max(lam1, lo))
    if not lo <= hi:
        raise EpsTooLargeError(
            f"feasible tau range for {which} empty at eps={eps:g}: "
            f"lo={lo:g} > hi={hi:g}"
        )
    return TauInterval(lo=lo, hi=hi, eps=eps)


def default_eps(m: Weight) -> float:
    """Starting eps for the inflation schedule, 1e-3 * (1 + total |m| mass)."""
    total = m.pos_part().integral() + m.neg_part().integral()
    return 1e-3 * (1.0 + total)


def feasible_tau(
    which: str,
    prob: Problem,
    eig: EigenPair,
    eps: float | None = None,
    max_halvings: int = 20,
) -> tuple[TauInterval, float]:
    """tau_interval with the halving eps schedule, plus a concrete tau pick.

    tau is the geometric mean of the interval, centered in its log-range.
    """
    if eps is None:
        eps = default_eps(prob.m)
    last = None
    for _ in range(max_halvings + 1):
        try:
            ti = tau_interval(which, prob, eig, eps)
        except EpsTooLargeError as exc:
            last = exc
            eps *= 0.5
            continue
        return ti, math.sqrt(ti.lo * ti.hi)
    raise EpsTooLargeError(
        f"no feasible tau range for {which} after {max_halvings} halvings: {last}"
    )
