"""Lagged Fibonacci sequences a_k(n) = a_k(n-1) + a_k(n // k): exact values,
Mahler-series and de Bruijn asymptotics, and the oscillation phi_k(n)."""

from .context import (
    DEFAULT_CONTEXT,
    DomainError,
    ExpansionResult,
    InconsistentResidues,
    InsufficientSampling,
    MemoryBudgetExceeded,
    PoleError,
    PrecisionContext,
)

__version__ = "0.1.0"
