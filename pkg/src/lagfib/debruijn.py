"""De Bruijn's asymptotic formula for ln a_k(n) and its periodic part psi_k.

psi_k is a period-1 Fourier series with coefficients

    alpha_0 = (-gamma_1 - gamma^2/2 + pi^2/12 + ln^2 k / 12) / ln k,
    alpha_j = Gamma(chi_j) zeta(1 + chi_j) / ln k,   chi_j = 2 pi i j / ln k,

evaluated at the phase x = log_k(n / log_k n).  The coefficients fall off
like exp(-pi^2 |j| / ln k), so a handful of terms suffices.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
from mpmath import mpc, mpf

from .context import DEFAULT_CONTEXT, DomainError, ExpansionResult, PrecisionContext
from .mahler import LargeArgument, as_argument
from .saddle import ln_S_constant_term
from .special import constants, gamma_complex, zeta_one_plus_it


def _check_k(k: int) -> None:
    if int(k) != k or k < 2:
        raise DomainError(f"k must be an integer >= 2, got {k!r}")


def alpha(k: int, j: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpc:
    """Fourier coefficient alpha_j(k) of psi_k."""
    _check_k(k)
    with ctx.work():
        lk = mpmath.log(k)
        if j == 0:
            c = constants(ctx)
            return mpc((-c.stieltjes_1 - c.euler_gamma**2 / 2 + c.pi**2 / 12 + lk**2 / 12) / lk)
        t = 2 * mpmath.pi * j / lk
        return gamma_complex(mpc(0, t), ctx) * zeta_one_plus_it(t, ctx) / lk


def gamma_zeta_abs(k: int, j: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpf:
    """|Gamma(chi_j) zeta(1 + chi_j)| = ln k * |alpha_j(k)|.

    The commonly tabulated coefficient magnitudes are in this normalisation,
    i.e. without the 1/ln k prefactor.
    """
    with ctx.work():
        return abs(alpha(k, j, ctx)) * mpmath.log(k)


@dataclass(frozen=True)
class FourierCoeffTable:
    """Coefficients alpha_j for |j| <= cutoff plus an estimate of the dropped tail."""

    k: int
    coeffs: dict
    cutoff: int
    tail_bound: mpf
    digits: int

    def __getitem__(self, j: int) -> mpc:
        return self.coeffs[j]

    @property
    def alpha0(self) -> mpf:
        return self.coeffs[0].real

    def abs_sum(self, weight_j: bool = False) -> mpf:
        """sum over j != 0 of |alpha_j| (or |j alpha_j|)."""
        return sum(abs(c) * (abs(j) if weight_j else 1) for j, c in self.coeffs.items() if j)


def build_fourier_table(k: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> FourierCoeffTable:
    """Smallest table whose two-sided tail is below ``ctx.fourier_cutoff_tail``.

    The tail beyond J is bounded by 2 |alpha_{J+1}| / (1 - rho).  The
    ratios |alpha_{j+1} / alpha_j| are not monotone (the zeta factor
    wobbles), so rho is twice the larger of the next two observed ratios.
    """
    _check_k(k)
    tol = mpf(ctx.fourier_cutoff_tail)
    with ctx.work():
        pos = [alpha(k, 0, ctx)]
        mags = [abs(pos[0])]

        def mag(j):
            while len(mags) <= j:
                pos.append(alpha(k, len(pos), ctx))
                mags.append(abs(pos[-1]))
            return mags[j]

        cutoff = 0
        while True:
            rho = 2 * max(mag(cutoff + 2) / mag(cutoff + 1), mag(cutoff + 3) / mag(cutoff + 2))
            tail = 2 * mag(cutoff + 1) / (1 - min(rho, mpf(0.5)))
            if tail <= tol or cutoff > 200:
                break
            cutoff += 1
        coeffs = {0: pos[0]}
        for j in range(1, cutoff + 1):
            coeffs[j] = pos[j]
            coeffs[-j] = alpha(k, -j, ctx)
    return FourierCoeffTable(k, coeffs, cutoff, tail, ctx.digits)


def psi_complex(table: FourierCoeffTable, x) -> mpc:
    """The truncated two-sided Fourier sum before discarding its imaginary part."""
    with mpmath.workdps(table.digits + 10):
        x = mpf(x)
        # only the fractional part matters; reducing keeps the exponentials accurate
        x = x - mpmath.floor(x)
        return mpmath.fsum(c * mpmath.expjpi(2 * j * x) for j, c in table.coeffs.items())


def psi(table: FourierCoeffTable, x) -> mpf:
    """Period-1 function psi_k at phase x."""
    return psi_complex(table, x).real


def phase(k: int, n) -> mpf:
    """x = log_k(n / log_k n)."""
    n = as_argument(n)
    lk = mpmath.log(k)
    L = mpmath.log(n.value) if n.value is not None else +n.ln
    return (L - mpmath.log(L / lk)) / lk


def _ln_n(n: LargeArgument) -> mpf:
    return mpmath.log(n.value) if n.value is not None else +n.ln


def constant_term(k: int) -> mpf:
    """Non-periodic constant of ln a_k(n): (1 + lnln k/(2 ln k)) lnln k - ln(2 pi)/2."""
    lk = mpmath.log(k)
    llk = mpmath.log(lk)
    return (1 + llk / (2 * lk)) * llk - mpmath.log(2 * mpmath.pi) / 2


def ln_a_asymptotic(k: int, n, table: FourierCoeffTable, ctx: PrecisionContext = DEFAULT_CONTEXT) -> ExpansionResult:
    """de Bruijn's expansion of ln a_k(n) without its O((lnln n)^2 / ln n) remainder."""
    n = as_argument(n)
    with ctx.work():
        lk = mpmath.log(k)
        L = _ln_n(n)
        if L < lk:
            raise DomainError("de Bruijn's expansion needs n >= k")
        LL = mpmath.log(L)
        llk = mpmath.log(lk)
        value = (
            (L - LL) ** 2 / (2 * lk)
            + (mpf(1) / 2 + 1 / lk + llk / lk) * L
            - (1 + llk / lk) * LL
            + constant_term(k)
            + psi(table, phase(k, n))
        )
        return ExpansionResult(value, 0, LL**2 / L)


def c_limit(k: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpf:
    """The limit of c_k(n): k ln k."""
    _check_k(k)
    with ctx.work():
        return k * mpmath.log(k)


def delta_psi(k: int, n, table: FourierCoeffTable, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpf:
    """psi_k(x - log_k(1 + 1/log_k n)) - psi_k(x) with x = log_k(n / log_k n)."""
    n = as_argument(n)
    with ctx.work():
        lk = mpmath.log(k)
        L = _ln_n(n)
        if L < 2 * lk:
            raise DomainError("delta_psi needs n >= k^2")
        x = phase(k, n)
        shift = mpmath.log(1 + lk / L) / lk
        return psi(table, x - shift) - psi(table, x)


def delta_psi_bound(k: int, n, table: FourierCoeffTable, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpf:
    """2 pi sum_j |j alpha_j| log_k(1 + 1/log_k n), an upper bound for |delta_psi|."""
    n = as_argument(n)
    with ctx.work():
        lk = mpmath.log(k)
        L = _ln_n(n)
        return 2 * mpmath.pi * table.abs_sum(weight_j=True) * mpmath.log(1 + lk / L) / lk


def ln_c_asymptotic(k: int, n, table: FourierCoeffTable, ctx: PrecisionContext = DEFAULT_CONTEXT) -> ExpansionResult:
    """ln(k ln k) + delta_psi; the remainder is O((lnln n)^2 / ln n)."""
    n = as_argument(n)
    with ctx.work():
        L = _ln_n(n)
        value = mpmath.log(c_limit(k, ctx)) + delta_psi(k, n, table, ctx)
        return ExpansionResult(value, 0, mpmath.log(L) ** 2 / L)


@dataclass(frozen=True)
class CenterConstant:
    """Constant around which phi_k oscillates, with alternative closed forms.

    ``value`` is the difference of the constant terms of ln a_k(n) (de
    Bruijn, including alpha_0) and of ln S_k(n) (saddle expansion).
    ``variants`` additionally holds ``alt_minus``/``alt_plus``:
    (1 + lnln k/ln k) ln k - ln(2 pi)/2 -/+ (ln k + 2 lnln k)^2/(8 ln k) + alpha_0,
    a closed form that does not match the measured center (about 0.5165
    for k = 2 against -0.0798).
    """

    k: int
    value: mpf
    variants: dict
    canonical: str = "matched"


def phi_center_constant(k: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> CenterConstant:
    _check_k(k)
    with ctx.work():
        lk = mpmath.log(k)
        llk = mpmath.log(lk)
        a0 = alpha(k, 0, ctx).real
        quad = (lk + 2 * llk) ** 2 / (8 * lk)
        lead = (1 + llk / lk) * lk - mpmath.log(2 * mpmath.pi) / 2
        matched = constant_term(k) + a0 - ln_S_constant_term(k)
        variants = {
            "matched": matched,
            "alt_minus": lead - quad + a0,
            "alt_plus": lead + quad + a0,
        }
        return CenterConstant(k, matched, variants)


def closest_variant(center: CenterConstant, empirical) -> str:
    """Name of the variant nearest to an empirically measured center."""
    return min(center.variants, key=lambda name: abs(center.variants[name] - empirical))
