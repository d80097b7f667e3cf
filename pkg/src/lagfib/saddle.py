"""Saddle-point expansion of ln S_k(n) in the small parameter eta = ln k / ln n.

Every bracket of the expansions is its own function so that each can be
checked on its own; ``order`` indexes the groups by their power of eta
(-2, -1, 0, 1, 2).  The expansion in powers of 1/ln n regroups the same
terms one group at a time, so the two forms agree group by group.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import mpmath
from mpmath import mpf

from .context import DEFAULT_CONTEXT, DomainError, ExpansionResult, PrecisionContext
from .mahler import LargeArgument, as_argument, ln_S, term_ln

ORDERS = (-2, -1, 0, 1, 2)


@dataclass(frozen=True)
class EtaParam:
    k: int
    eta: mpf

    def __post_init__(self):
        if self.eta <= 0:
            raise DomainError("eta must be positive")
        if self.eta >= 1:
            warnings.warn(f"eta = {float(self.eta):.3g} is outside the asymptotic regime", stacklevel=3)

    @classmethod
    def from_n(cls, k: int, n) -> EtaParam:
        n = as_argument(n)
        return cls(k, mpmath.log(k) / n.ln)

    @property
    def ln_n(self) -> mpf:
        return mpmath.log(self.k) / self.eta


def _logs(p: EtaParam):
    lk = mpmath.log(p.k)
    return lk, mpmath.log(p.eta)


# -- moving saddle point ----------------------------------------------------------


def delta_j_choice(p: EtaParam) -> mpf:
    """Offset that symmetrises the Gaussian around the saddle."""
    return mpf(0.5) + p.eta**2 / (24 * mpmath.log(p.k))


def saddle_j0(p: EtaParam, delta_j=None) -> mpf:
    """Location of the largest term, expanded through eta**3."""
    if delta_j is None:
        delta_j = delta_j_choice(p)
    eta = p.eta
    lk, le = _logs(p)
    lke = le / lk  # log_k eta
    c = 1 + lke
    return (
        1 / eta
        + lke
        + 1
        - delta_j
        - eta * c / lk
        + eta**2 * c / (2 * lk) * (2 / lk + 1 + lke)
        - eta**3 * c / (6 * lk) * (6 / lk**2 + 9 / lk + 2 + le / lk * (4 + 9 / lk) + 2 * le**2 / lk**2)
    )


def saddle_root(p: EtaParam) -> mpf:
    """Continuous solution u of u - 1 + log_k u = 1/eta (u = j0 + delta_j)."""
    lk = mpmath.log(p.k)
    return mpmath.findroot(lambda u: u - 1 + mpmath.log(u) / lk - 1 / p.eta, 1 / p.eta)


def gaussian_width_check(p: EtaParam) -> mpf:
    """Curvature ln k + eta - eta^2 (1 + ln eta / ln k) of the Gaussian."""
    lk, le = _logs(p)
    return lk + p.eta - p.eta**2 * (1 + le / lk)


def phi_summand_ln(k: int, n, j: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpf:
    """Log of the j-th summand; same as ``mahler.term_ln``."""
    return term_ln(k, n, j, ctx)


def discrete_curvature(k: int, n, j: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpf:
    """Minus the second difference of the log-summand at j."""
    with ctx.work():
        return -(phi_summand_ln(k, n, j + 1, ctx) - 2 * phi_summand_ln(k, n, j, ctx) + phi_summand_ln(k, n, j - 1, ctx))


# -- expansion in eta -------------------------------------------------------------


def eta_group_m2(p: EtaParam) -> mpf:
    return mpmath.log(p.k) / (2 * p.eta**2)


def eta_group_m1(p: EtaParam) -> mpf:
    lk, le = _logs(p)
    return (2 * le + lk + 2) / (2 * p.eta)


def eta_group_0(p: EtaParam) -> mpf:
    lk, le = _logs(p)
    return le**2 / (2 * lk) + le - mpmath.log(lk) / 2 + lk / 8


def eta_group_1(p: EtaParam) -> mpf:
    lk, le = _logs(p)
    return -p.eta * (le**2 / (2 * lk**2) + le / lk + mpf(11) / 24 + 1 / (2 * lk))


def eta_group_2(p: EtaParam) -> mpf:
    lk, le = _logs(p)
    return p.eta**2 * (
        le**3 / (6 * lk**3)
        + (1 + 1 / lk) * le**2 / (2 * lk**2)
        + (mpf(11) / 24 + 3 / (2 * lk)) * le / lk
        + (mpf(1) / 8 + 1 / lk + 1 / (4 * lk**2))
    )


ETA_GROUPS = dict(zip(ORDERS, (eta_group_m2, eta_group_m1, eta_group_0, eta_group_1, eta_group_2)))


def _check_order(order: int) -> None:
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}")


def ln_S_expansion_eta(p: EtaParam, order: int = 2) -> ExpansionResult:
    """Truncated expansion of ln S_k(n) keeping groups up to eta**order."""
    _check_order(order)
    value = sum(ETA_GROUPS[o](p) for o in ORDERS if o <= order)
    le = abs(mpmath.log(p.eta))
    return ExpansionResult(value, order, p.eta ** (order + 1) * le**4)


# -- expansion in 1/ln n ------------------------------------------------------------


def _log_terms(k: int, ln_n: mpf):
    lk = mpmath.log(k)
    return ln_n, mpmath.log(ln_n), lk, mpmath.log(lk)


def logn_group_m2(k: int, ln_n: mpf) -> mpf:
    L, LL, lk, llk = _log_terms(k, ln_n)
    return L**2 / (2 * lk)


def logn_group_m1(k: int, ln_n: mpf) -> mpf:
    L, LL, lk, llk = _log_terms(k, ln_n)
    return L * (-LL / lk + llk / lk + mpf(1) / 2 + 1 / lk)


def logn_group_0(k: int, ln_n: mpf) -> mpf:
    L, LL, lk, llk = _log_terms(k, ln_n)
    return LL**2 / (2 * lk) - LL * (llk / lk + 1) + (lk + 2 * llk) ** 2 / (8 * lk)


def logn_group_1(k: int, ln_n: mpf) -> mpf:
    L, LL, lk, llk = _log_terms(k, ln_n)
    return -lk / L * (
        LL**2 / (2 * lk**2)
        - LL / lk * (1 + llk / lk)
        + mpf(11) / 24
        + 1 / (2 * lk)
        + llk / lk
        + llk**2 / (2 * lk**2)
    )


def logn_group_2(k: int, ln_n: mpf) -> mpf:
    L, LL, lk, llk = _log_terms(k, ln_n)
    return -(lk**2) / L**2 * (
        LL**3 / (6 * lk**3)
        - LL**2 / (2 * lk**2) * (1 + 1 / lk + llk / lk)
        + LL / lk * (mpf(11) / 24 + 3 / (2 * lk) + llk / lk + llk / lk**2 + llk**2 / (2 * lk**2))
        - mpf(1) / 8
        - 1 / lk
        - 1 / (4 * lk**2)
        - 11 * llk / (24 * lk)
        - 3 * llk / (2 * lk**2)
        - llk**2 / (2 * lk**2)
        - llk**2 / (2 * lk**3)
        - llk**3 / (6 * lk**3)
    )


LOGN_GROUPS = dict(zip(ORDERS, (logn_group_m2, logn_group_m1, logn_group_0, logn_group_1, logn_group_2)))


def ln_S_constant_term(k: int) -> mpf:
    """The n-independent part of the 1/ln n expansion: (ln k + 2 ln ln k)^2 / (8 ln k)."""
    lk = mpmath.log(k)
    return (lk + 2 * mpmath.log(lk)) ** 2 / (8 * lk)


def ln_S_expansion_logn(k: int, n, ctx: PrecisionContext = DEFAULT_CONTEXT, order: int = 2) -> ExpansionResult:
    """Truncated expansion of ln S_k(n) in powers of 1/ln n."""
    _check_order(order)
    n = as_argument(n)
    with ctx.work():
        if n.ln < 2 * mpmath.log(k):
            raise DomainError("expansion needs n >= k^2")
        L = +n.ln if n.value is None else mpmath.log(n.value)
        value = sum(LOGN_GROUPS[o](k, L) for o in ORDERS if o <= order)
        LL = mpmath.log(L)
        scale = LL**4 / L**3 if order == 2 else (mpmath.log(k) / L) ** (order + 1) * LL**4
        return ExpansionResult(value, order, scale)


def fig4_rows(k: int, etas, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """Rows (eta, exact, order -2..2 approximants, asymptote) of ln S / ln^2 n."""
    rows = []
    with ctx.work():
        asymptote = 1 / (2 * mpmath.log(k))
        for eta in etas:
            p = EtaParam(k, mpf(eta))
            L = p.ln_n
            exact = ln_S(k, LargeArgument.from_ln(L), ctx) / L**2
            approx = [ln_S_expansion_eta(p, o).value / L**2 for o in ORDERS]
            rows.append((p.eta, exact, *approx, asymptote))
    return rows


def eta_grid(lo: float = 0.02, hi: float = 0.35, count: int = 34) -> list[float]:
    step = (hi - lo) / (count - 1)
    return [round(lo + i * step, 12) for i in range(count)]

