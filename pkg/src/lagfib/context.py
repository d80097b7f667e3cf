"""Working-precision settings, shared result types and exceptions."""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import mpmath

#: Extra decimal digits carried internally on top of ``PrecisionContext.digits``.
GUARD_DIGITS = 10


class LagfibError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LagfibError, ValueError):
    """Argument lies outside the domain where a quantity is defined."""


class PoleError(DomainError):
    """Argument is (numerically) at a pole of a special function."""


class MemoryBudgetExceeded(LagfibError, MemoryError):
    """The exact engine refuses a run whose storage estimate exceeds the budget."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"estimated storage {required / 2**20:.1f} MiB exceeds the memory "
            f"budget of {budget / 2**20:.1f} MiB"
        )


class InconsistentResidues(LagfibError, ValueError):
    """Residues cannot be combined by the Chinese remainder theorem."""


class InsufficientSampling(LagfibError, ValueError):
    """Samples are too sparse to resolve an oscillation."""


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision and truncation tolerances.

    ``digits`` is the number of significant decimal digits requested from
    high-precision operations; internally ``GUARD_DIGITS`` more are carried.
    """

    digits: int = 60
    fourier_cutoff_tail: float = 1e-30
    series_tail_tol: float = 1e-40

    def __post_init__(self):
        if self.digits < 15:
            raise ValueError("digits must be at least 15")

    @property
    def pole_tolerance(self) -> mpmath.mpf:
        return mpmath.mpf(10) ** (-self.digits / 2)

    @property
    def eps(self) -> mpmath.mpf:
        return mpmath.mpf(10) ** (-self.digits)

    def escalated(self, extra: int) -> PrecisionContext:
        return PrecisionContext(self.digits + extra, self.fourier_cutoff_tail, self.series_tail_tol)

    @contextmanager
    def work(self, extra: int = GUARD_DIGITS):
        """Run the enclosed block at ``digits + extra`` decimal digits."""
        with mpmath.workdps(self.digits + extra):
            yield


DEFAULT_CONTEXT = PrecisionContext()


@dataclass(frozen=True)
class ExpansionResult:
    """Value of a truncated asymptotic expansion.

    ``error_scale`` is the size of the first omitted term up to an unknown
    constant; it is meant for envelope comparisons, not as a hard bound.
    ``variants`` holds alternative evaluations kept for comparison.
    """

    value: mpmath.mpf
    order: int
    error_scale: mpmath.mpf
    variants: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)
