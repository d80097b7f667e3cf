"""The oscillating difference phi_k(n) = ln a_k(n) - ln S_k(n).

phi_k oscillates with period 1 in the phase x = log_k(n / log_k n) around a
constant, with an amplitude that decays towards a small remanent value set
by the Fourier coefficients of psi_k.  This module samples phi_k on a grid
uniform in x, locates its extrema and fits mu0 + mu1 x^mu2 to the maxima
and minima separately; the two mu0 bracket the asymptotic oscillation band.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .context import DEFAULT_CONTEXT, DomainError, ExpansionResult, InsufficientSampling, PrecisionContext
from .debruijn import FourierCoeffTable, phase, phi_center_constant, psi
from .exact import SequenceWindow, ln_int, memory_budget, plan_moduli
from .mahler import LargeArgument, ln_S

log = logging.getLogger(__name__)

#: Default largest n for exact sampling of phi.
N_MAX_DEFAULT = 10**8

#: Largest n for which the exact engine keeps full integers by default.
EXACT_MODE_LIMIT = 2 * 10**6


@dataclass(frozen=True)
class PhiSample:
    n: int
    x: float
    phi: float


@dataclass(frozen=True)
class Extremum:
    x: float
    value: float
    kind: str  # "max" or "min"
    n: int


@dataclass(frozen=True)
class ExtremaFit:
    """Least-squares fit of mu0 + mu1 * x**mu2; ``residual`` is the RMS error."""

    mu0: float
    mu1: float
    mu2: float
    residual: float
    kind: str
    degenerate: bool = False

    def predict(self, x):
        return self.mu0 + self.mu1 * np.asarray(x, dtype=float) ** self.mu2


# -- sampling ----------------------------------------------------------------------


def phase_float(k: int, n: float) -> float:
    L = math.log(n)
    return (L - math.log(L / math.log(k))) / math.log(k)


def n_at_phase(k: int, x: float) -> float:
    """Inverse of ``phase_float`` on the increasing branch (n > e k)."""
    lk = math.log(k)
    L = max(x * lk, 2.0)
    for _ in range(100):
        f = L - math.log(L / lk) - x * lk
        step = f / (1 - 1 / L)
        L -= step
        if abs(step) < 1e-14 * L:
            break
    return math.exp(L)


def phase_grid(k: int, n_lo: int, n_hi: int, points_per_half_period: int = 40) -> list[int]:
    """Integers n in [n_lo, n_hi] nearest to a grid uniform in the phase."""
    if n_lo <= math.e * k:
        raise DomainError("phase grid needs n_lo > e k")
    x0, x1 = phase_float(k, n_lo), phase_float(k, n_hi)
    step = 0.5 / points_per_half_period
    count = int((x1 - x0) / step) + 1
    ns = {min(n_hi, max(n_lo, round(n_at_phase(k, x0 + i * step)))) for i in range(count)}
    return sorted(ns)


def _phi_value(k: int, n: int, a_n: int, ctx: PrecisionContext) -> mpmath.mpf:
    with ctx.work():
        return ln_int(a_n, ctx) - ln_S(k, LargeArgument.from_int(n), ctx)


def phi(k: int, n: int, ctx: PrecisionContext = DEFAULT_CONTEXT, *, a_n: int | None = None) -> PhiSample:
    """phi_k(n) from the exact a_k(n) and the series."""
    if a_n is None:
        from .exact import compute_a

        a_n = compute_a(k, n)
    value = _phi_value(k, n, a_n, ctx)
    return PhiSample(n, phase_float(k, n) if n > math.e * k else float("nan"), float(value))


def sample_phi(k: int, ns, ctx: PrecisionContext = PrecisionContext(30), *, memory_budget_bytes: int | None = None) -> list[PhiSample]:
    """phi_k at each n of ``ns`` from a single streaming pass of the exact engine."""
    ns = sorted({int(n) for n in ns})
    n_max = ns[-1]
    moduli = None if n_max <= EXACT_MODE_LIMIT else plan_moduli(k, n_max, with_prefix=False)
    win = SequenceWindow(k, n_max, moduli, memory_budget_bytes=memory_budget(memory_budget_bytes))
    log.info("sampling phi_%d at %d points up to n=%d (%s mode)", k, len(ns), n_max, "exact" if moduli is None else "residue")
    values = win.advance(n_max, record=ns)
    if 0 in ns:
        values[0] = win.value(0)
    out = []
    for n in ns:
        a_n = win.to_int(values[n])
        out.append(PhiSample(n, phase_float(k, n), float(_phi_value(k, n, a_n, ctx))))
    return out


def phi_asymptotic(k: int, n, table: FourierCoeffTable, ctx: PrecisionContext = DEFAULT_CONTEXT) -> ExpansionResult:
    """Center constant plus the oscillating part psi_k(x) - alpha_0.

    ``variants`` carries the same expression built on the alternative closed
    forms of the center constant.
    """
    with ctx.work():
        center = phi_center_constant(k, ctx)
        x = phase(k, n)
        osc = psi(table, x) - table.alpha0
        L = LargeArgument.from_int(n).ln if not isinstance(n, LargeArgument) else n.ln
        scale = mpmath.log(L) ** 2 / L
        variants = {name: v + osc for name, v in center.variants.items()}
        return ExpansionResult(center.value + osc, 0, scale, variants)


# -- extrema -------------------------------------------------------------------------


def _refine(x3, y3):
    # vertex of the parabola through three points, in coordinates relative to the middle one
    x0, y0 = x3[1], y3[1]
    a, b, c = np.polyfit(np.asarray(x3) - x0, np.asarray(y3) - y0, 2)
    if a == 0:
        return x0, y0
    xv = -b / (2 * a)
    if abs(xv) > max(abs(x3[0] - x0), abs(x3[2] - x0)):
        return x0, y0
    return x0 + xv, y0 + c + b * xv + a * xv * xv


def find_extrema(samples, min_separation: float = 0.25, min_points_per_half_period: int = 3) -> list[Extremum]:
    """Alternating extrema of an oscillating sequence of samples.

    Strict three-point extrema are refined by quadratic interpolation.  An
    extremum closer than ``min_separation`` (in x) to the previously accepted
    one is treated as grid noise: it replaces the previous one only if it is
    of the same kind and more extreme, otherwise it is dropped.
    """
    samples = list(samples)
    if len(samples) < 3:
        raise InsufficientSampling("need at least three samples")
    x = np.array([s.x for s in samples], dtype=float)
    y = np.array([s.phi for s in samples], dtype=float)
    ns = [s.n for s in samples]
    spacing = float(np.median(np.diff(x)))
    if spacing <= 0 or 0.5 / spacing < min_points_per_half_period:
        raise InsufficientSampling(f"median spacing {spacing:.3g} leaves fewer than {min_points_per_half_period} points per half period")

    accepted: list[Extremum] = []
    dropped = 0
    for i in range(1, len(y) - 1):
        if y[i] > y[i - 1] and y[i] > y[i + 1]:
            kind = "max"
        elif y[i] < y[i - 1] and y[i] < y[i + 1]:
            kind = "min"
        else:
            continue
        xv, yv = _refine(x[i - 1 : i + 2], y[i - 1 : i + 2])
        ext = Extremum(float(xv), float(yv), kind, ns[i])
        if accepted:
            prev = accepted[-1]
            more = (ext.value > prev.value) if kind == "max" else (ext.value < prev.value)
            if ext.x - prev.x < min_separation:
                if kind == prev.kind and more:
                    accepted[-1] = ext
                dropped += 1
                continue
            if kind == prev.kind:
                # alternation violated: keep the more extreme of the two
                if more:
                    accepted[-1] = ext
                dropped += 1
                continue
        accepted.append(ext)
    if dropped:
        log.info("find_extrema: dropped %d noisy extrema", dropped)
    return accepted


# -- power-law fit -------------------------------------------------------------------


def _linear_part(x, y, mu2):
    design = np.column_stack([np.ones_like(x), x**mu2])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = design @ coef - y
    return coef, float(resid @ resid)


def _golden_min(f, lo, hi, tol=1e-13):
    inv_phi = (math.sqrt(5) - 1) / 2
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = f(d)
    return (lo + hi) / 2


def fit_power_law(points, kind: str = "max", bracket=(-6.0, -0.1)) -> ExtremaFit:
    """Least-squares fit of y = mu0 + mu1 x^mu2.

    mu2 is found by golden-section search over ``bracket`` (started from the
    best point of a coarse scan) with (mu0, mu1) solved in closed form for
    each trial mu2.  Constant data leaves mu2 unidentifiable; the fit is then
    returned with mu2 = -1 and ``degenerate=True``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise ValueError("need at least four (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    # centre y so the linear solve works on the variation only
    y0 = float(np.mean(y))
    yc = y - y0
    if np.ptp(yc) <= 1e-15 * max(1.0, abs(y0)):
        coef, ss = _linear_part(x, yc, -1.0)
        return ExtremaFit(coef[0] + y0, coef[1], -1.0, math.sqrt(ss / len(x)), kind, degenerate=True)
    lo, hi = bracket
    profile = lambda m: _linear_part(x, yc, m)[1]
    grid = np.linspace(lo, hi, 60)
    best = int(np.argmin([profile(m) for m in grid]))
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    mu2 = _golden_min(profile, a, b)
    coef, ss = _linear_part(x, yc, mu2)
    return ExtremaFit(float(coef[0] + y0), float(coef[1]), float(mu2), math.sqrt(ss / len(x)), kind)


@dataclass
class PhiAnalysis:
    """Outcome of a full phi sampling / extrema / fit run."""

    k: int
    samples: list
    extrema: list
    fit_max: ExtremaFit
    fit_min: ExtremaFit
    center_constant: float
    extra: dict = field(default_factory=dict)

    @property
    def center(self) -> float:
        """Midpoint of the two extrapolated branches."""
        return (self.fit_max.mu0 + self.fit_min.mu0) / 2

    @property
    def remanent_amplitude(self) -> float:
        """Half the gap between the extrapolated maxima and minima."""
        return (self.fit_max.mu0 - self.fit_min.mu0) / 2

    def extrema_points(self, kind: str):
        return [(e.x, e.value) for e in self.extrema if e.kind == kind]


def analyze_phi(
    k: int,
    n_max: int = N_MAX_DEFAULT,
    *,
    n_sample_min: int = 1000,
    n_fit_min: int = 10**4,
    points_per_half_period: int = 40,
    ctx: PrecisionContext = PrecisionContext(30),
    memory_budget_bytes: int | None = None,
) -> PhiAnalysis:
    """Sample phi_k up to ``n_max``, find its extrema and fit both branches.

    Only extrema with n >= ``n_fit_min`` enter the fits.
    """
    ns = phase_grid(k, n_sample_min, n_max, points_per_half_period)
    samples = sample_phi(k, ns, ctx, memory_budget_bytes=memory_budget_bytes)
    extrema = find_extrema(samples)
    fits = {}
    for kind in ("max", "min"):
        pts = [(e.x, e.value) for e in extrema if e.kind == kind and e.n >= n_fit_min]
        fits[kind] = fit_power_law(pts, kind)
    center = float(phi_center_constant(k, ctx).value)
    return PhiAnalysis(k, samples, extrema, fits["max"], fits["min"], center)
