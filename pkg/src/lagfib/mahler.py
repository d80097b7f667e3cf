"""The Mahler series S_k(n) = sum_j n^j / (k^(j(j-1)/2) j!) in log space.

For large n the individual terms overflow any fixed-exponent float, so the
sum is always taken relative to its largest term:

    ln S = t(j*) + ln sum_j exp(t(j) - t(j*)),

where t(j) is the log of the j-th term and j* its maximiser.  The terms are
log-concave in j (consecutive log-ratios ln n - ln j - (j-1) ln k decrease),
so summing outward from j* in both directions may stop as soon as a term
drops below the tail tolerance.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import mpmath
from mpmath import mpf

from .context import DEFAULT_CONTEXT, GUARD_DIGITS, DomainError, PrecisionContext

# ln(j!) from the exact factorial up to here, mpmath's loggamma above
EXACT_FACTORIAL_MAX = 1000

_EXPR = re.compile(
    r"""^\s*(?:(?P<coef>\d+(?:\.\d*)?)\s*\*\s*)?
        (?P<base>\d+(?:\.\d*)?)
        (?:\s*(?:\^|\*\*)\s*(?P<exp>\d+))?\s*$""",
    re.X,
)
_SCI = re.compile(r"^\s*(?P<mant>\d+(?:\.\d*)?)[eE](?P<exp>\d+)\s*$")

# decimal size above which n is only kept as ln n
_MAX_EXACT_DIGITS = 100_000
# precision at which ln n is stored
LN_DIGITS = 120


@dataclass(frozen=True)
class LargeArgument:
    """A positive argument n known exactly, by its logarithm, or both."""

    value: int | None
    ln: mpf

    @classmethod
    def from_int(cls, n: int) -> LargeArgument:
        n = int(n)
        if n < 0:
            raise DomainError("n must be nonnegative")
        with mpmath.workdps(max(mpmath.mp.dps, LN_DIGITS)):
            ln = mpmath.log(n) if n > 0 else mpmath.mpf("-inf")
        return cls(n, ln)

    @classmethod
    def from_ln(cls, ln) -> LargeArgument:
        return cls(None, mpf(ln))

    @classmethod
    def parse(cls, text: str, digits: int = 60) -> LargeArgument:
        """Parse ``"12345"``, ``"10^9"``, ``"2**1000"``, ``"3*10^9"`` or ``"1e6"``."""
        m = _SCI.match(text)
        if m:
            coef, base, exp = m["mant"], "10", int(m["exp"])
        else:
            m = _EXPR.match(text)
            if not m:
                raise ValueError(f"cannot parse n-expression {text!r}")
            coef, base = m["coef"] or "1", m["base"]
            exp = int(m["exp"]) if m["exp"] else 1
        coef_q, base_q = Fraction(coef), Fraction(base)
        if coef_q == 0 or base_q == 0:
            return cls.from_int(0)
        if exp * math.log10(max(base_q, 2)) < _MAX_EXACT_DIGITS:
            value = coef_q * base_q**exp
            if value.denominator != 1:
                raise ValueError(f"{text!r} is not an integer")
            return cls.from_int(int(value))
        with mpmath.workdps(max(digits + GUARD_DIGITS, LN_DIGITS)):
            return cls(None, mpmath.log(mpf(coef)) + exp * mpmath.log(mpf(base)))

    def scaled(self, k: int) -> LargeArgument:
        """The argument k * n."""
        with mpmath.workdps(max(mpmath.mp.dps, LN_DIGITS)):
            ln = self.ln + mpmath.log(k)
        return LargeArgument(None if self.value is None else self.value * k, ln)

    @property
    def is_zero(self) -> bool:
        return self.value == 0

    def __str__(self):
        if self.value is not None:
            return str(self.value)
        return f"exp({mpmath.nstr(self.ln, 20)})"


def as_argument(n) -> LargeArgument:
    if isinstance(n, LargeArgument):
        return n
    if isinstance(n, str):
        return LargeArgument.parse(n)
    return LargeArgument.from_int(n)


def _ln_n(n: LargeArgument) -> mpf:
    # re-evaluate at the current working precision when the exact value is known
    if n.value is not None and n.value > 0:
        return mpmath.log(n.value)
    return +n.ln


def ln_factorial(j: int) -> mpf:
    if j <= EXACT_FACTORIAL_MAX:
        return mpmath.log(math.factorial(j))
    return mpmath.loggamma(j + 1)


def term_ln(k: int, n, j: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpf:
    """Log of the j-th series term: j ln n - ln j! - j(j-1)/2 ln k."""
    n = as_argument(n)
    if j == 0:
        return mpf(0)
    if n.is_zero:
        return mpf("-inf")
    with ctx.work(GUARD_DIGITS + _magnitude_digits(j * max(1.0, abs(float(n.ln))))):
        return j * _ln_n(n) - ln_factorial(j) - mpf(j) * (j - 1) / 2 * mpmath.log(k)


def _magnitude_digits(x: float) -> int:
    return max(0, math.ceil(math.log10(abs(x) + 1)))


def _ratio_positive(k: int, n: LargeArgument, ln_n: mpf, lk: mpf, j: int) -> bool:
    """Is term(j) strictly larger than term(j-1)?  i.e. n > j k^(j-1)."""
    if n.value is not None and j < 4096:
        return n.value > j * k ** (j - 1)
    return ln_n - mpmath.log(j) - (j - 1) * lk > 0


def peak_index(k: int, n, ctx: PrecisionContext = DEFAULT_CONTEXT) -> int:
    """Index of the largest series term (the smaller index on ties)."""
    n = as_argument(n)
    if n.is_zero:
        return 0
    with ctx.work(GUARD_DIGITS + _magnitude_digits(float(n.ln))):
        ln_n = _ln_n(n)
        lk = mpmath.log(k)
        # continuous solution of ln n = ln j + (j - 1) ln k, then a local scan
        x = float(ln_n)
        flk = float(lk)
        j = max(1.0, x / flk)
        for _ in range(100):
            f = x - math.log(j) - (j - 1) * flk
            j_new = max(1.0, j + f / (flk + 1 / j))
            if abs(j_new - j) < 1e-9:
                break
            j = j_new
        j = max(0, int(j))
        while j > 0 and not _ratio_positive(k, n, ln_n, lk, j):
            j -= 1
        while _ratio_positive(k, n, ln_n, lk, j + 1):
            j += 1
        return j


def _expected_ln_s(k: int, ln_n: float) -> float:
    return max(1.0, ln_n) ** 2 / (2 * math.log(k)) + abs(ln_n)


def ln_S(k: int, n, ctx: PrecisionContext = DEFAULT_CONTEXT, *, extra_terms: int = 0) -> mpf:
    """ln S_k(n), summed outward from the largest term.

    ``extra_terms`` keeps summing that many terms past the tail cut-off on
    each side (used to check that truncation is harmless).
    """
    n = as_argument(n)
    if n.is_zero:
        return mpf(0)
    if n.ln < 0:
        raise DomainError("ln_S needs n >= 1")
    extra = GUARD_DIGITS + _magnitude_digits(_expected_ln_s(k, float(n.ln)))
    with ctx.work(extra):
        ln_n = _ln_n(n)
        lk = mpmath.log(k)
        j0 = peak_index(k, n, ctx)
        peak = j0 * ln_n - ln_factorial(j0) - mpf(j0) * (j0 - 1) / 2 * lk
        tol = min(mpf(ctx.series_tail_tol), mpf(10) ** (-(ctx.digits + 5)))
        total = mpf(1)
        # upward: t(j) - t(j-1) = ln n - ln j - (j-1) ln k
        rel = mpf(0)
        j = j0
        left = extra_terms
        while True:
            j += 1
            rel += ln_n - mpmath.log(j) - (j - 1) * lk
            term = mpmath.exp(rel)
            total += term
            if term < tol:
                if left <= 0:
                    break
                left -= 1
        rel = mpf(0)
        j = j0
        left = extra_terms
        while j > 0:
            rel -= ln_n - mpmath.log(j) - (j - 1) * lk
            j -= 1
            term = mpmath.exp(rel)
            total += term
            if term < tol:
                if left <= 0:
                    break
                left -= 1
        return peak + mpmath.log(total)


def ln_S_direct(k: int, n: int, terms: int = 200, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpf:
    """Plain left-to-right summation; only sensible for small n."""
    with ctx.work():
        n = mpf(n)
        s = mpf(0)
        for j in range(terms):
            s += n**j / (mpf(k) ** (j * (j - 1) // 2) * mpmath.factorial(j))
        return mpmath.log(s)


def b(k: int, n, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpf:
    """Series approximant S_k(kn) / S_k(n) * ln n / n of the ratio c_k(n)."""
    n = as_argument(n)
    if n.value is not None and n.value < 2:
        raise DomainError("b_k(n) needs n >= 2")
    if n.value is None and n.ln < mpmath.log(2):
        raise DomainError("b_k(n) needs n >= 2")
    with ctx.work():
        ln_n = _ln_n(n)
        log_ratio = ln_S(k, n.scaled(k), ctx) - ln_S(k, n, ctx) + mpmath.log(ln_n) - ln_n
        return mpmath.exp(log_ratio)
