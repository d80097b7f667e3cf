"""Complex Gamma and Riemann zeta at arbitrary precision.

Both functions are written directly on top of mpmath's multiprecision
arithmetic (``mpf``/``mpc``); mpmath's own ``gamma``/``zeta`` are used only
by the test-suite as an independent cross-check.

Gamma
    Stirling's series for ``log Gamma(w)`` after shifting ``w = z + N`` far
    enough to the right that the series reaches the working precision, then
    the recurrence ``Gamma(z) = Gamma(z + N) / (z (z+1) ... (z+N-1))``.  The
    shift keeps the accuracy uniform along the imaginary axis, where the
    Fourier coefficients need it.

Zeta
    Euler-Maclaurin summation with ``N`` explicit terms and ``M`` Bernoulli
    corrections, ``N`` chosen so that consecutive corrections shrink by at
    least a factor 16.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
from mpmath import mpc, mpf

from .context import DEFAULT_CONTEXT, PoleError, PrecisionContext

# Published 70-digit values; the first Stieltjes constant is not computed here.
EULER_GAMMA = "0.5772156649015328606065120900824024310421593359399235988057672348848677"
STIELTJES_1 = "-0.07281584548367672486058637587490131913773633833433795259900655974140143"


@dataclass(frozen=True)
class MathConstants:
    euler_gamma: mpf
    stieltjes_1: mpf
    pi: mpf
    ln_2pi: mpf


def constants(ctx: PrecisionContext = DEFAULT_CONTEXT) -> MathConstants:
    with ctx.work():
        return MathConstants(
            euler_gamma=mpf(EULER_GAMMA),
            stieltjes_1=mpf(STIELTJES_1),
            pi=+mpmath.pi,
            ln_2pi=mpmath.log(2 * mpmath.pi),
        )


@lru_cache(maxsize=None)
def _bernoulli_even(m: int, dps: int) -> mpf:
    with mpmath.workdps(dps):
        return mpmath.bernoulli(2 * m)


def _loggamma_stirling(w: mpc, eps: mpf, dps: int) -> mpc:
    # valid for Re w large; terms B_2m / (2m (2m-1) w^(2m-1))
    total = (w - mpf(0.5)) * mpmath.log(w) - w + mpmath.log(2 * mpmath.pi) / 2
    winv2 = 1 / (w * w)
    power = 1 / w
    for m in range(1, 400):
        term = _bernoulli_even(m, dps) / ((2 * m) * (2 * m - 1)) * power
        total += term
        if abs(term) < eps:
            break
        power *= winv2
    return total


def gamma_complex(z, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpc:
    """Gamma function at a complex argument.

    Raises ``PoleError`` if ``z`` lies within ``ctx.pole_tolerance`` of a
    nonpositive integer.
    """
    with ctx.work():
        z = mpc(z)
        tol = ctx.pole_tolerance
        nearest = mpmath.nint(z.real)
        if nearest <= 0 and abs(z.imag) < tol and abs(z.real - nearest) < tol:
            raise PoleError(f"Gamma has a pole at {int(nearest)}")
        dps = mpmath.mp.dps
        # Stirling's series bottoms out near exp(-2 pi |w|)
        reach = 0.4 * dps + 10
        shift = max(0, math.ceil(reach - float(z.real)))
        w = z + shift
        eps = mpf(10) ** (-dps)
        lg = _loggamma_stirling(w, eps, dps)
        denom = mpc(1)
        for m in range(shift):
            denom *= z + m
        result = mpmath.exp(lg) / denom
    return result


def zeta(s, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpc:
    """Riemann zeta function for ``Re s >= 1``, ``s != 1``."""
    with ctx.work():
        s = mpc(s)
        if abs(s - 1) < ctx.pole_tolerance:
            raise PoleError("zeta has a pole at s = 1")
        if s.real < 1:
            raise ValueError("zeta is only implemented for Re s >= 1")
        dps = mpmath.mp.dps
        eps = mpf(10) ** (-dps)
        n_corr = math.ceil(dps / 1.2) + 2
        n_terms = math.ceil(4 * (float(abs(s)) + 2 * n_corr) / (2 * math.pi)) + 1
        total = mpc(0)
        for n in range(1, n_terms):
            total += mpmath.power(n, -s)
        big_n = mpf(n_terms)
        n_pow = mpmath.power(big_n, -s)
        total += big_n * n_pow / (s - 1) + n_pow / 2
        # rising factorial s (s+1) ... (s+2m-2) and N^(-s-2m+1)
        rising = s
        n_pow = n_pow / big_n
        fact = mpf(2)
        for m in range(1, n_corr + 1):
            term = _bernoulli_even(m, dps) / fact * rising * n_pow
            total += term
            if abs(term) < eps * abs(total):
                break
            rising *= (s + 2 * m - 1) * (s + 2 * m)
            n_pow /= big_n * big_n
            fact *= (2 * m + 1) * (2 * m + 2)
    return total


def zeta_one_plus_it(t, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpc:
    """``zeta(1 + i t)`` for real ``t != 0``."""
    with ctx.work():
        t = mpf(t)
        if abs(t) < ctx.pole_tolerance:
            raise PoleError("zeta(1 + it) has a pole at t = 0")
        return zeta(mpc(1, t), ctx)
