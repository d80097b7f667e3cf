"""Command-line front end.

Usage:
    lagfib exact --k 2 --n 10^6             # exact a_2(10^6)
    lagfib exact --k 3 --n 10^7 --residues  # residues only
    lagfib table1 --k 2 --n-max 10^6        # c_k(n) against b_k(n)
    lagfib table2 --k 2 --k 3 --j-max 4     # Fourier coefficient magnitudes
    lagfib figure phi_curve --k 2 -o phi.csv

Exit codes: 0 success, 2 resource refusal, 3 domain error, 4 internal
invariant violation.  Output files are written atomically and identical
configurations give byte-identical output.
"""

from __future__ import annotations

import functools
import json
import os
import sys
import tempfile
from pathlib import Path

import click
import mpmath

from . import debruijn, exact, mahler, phi, saddle
from .context import DomainError, InconsistentResidues, LagfibError, MemoryBudgetExceeded, PrecisionContext

__all__ = ["cli", "main"]

EXIT_RESOURCE = 2
EXIT_DOMAIN = 3
EXIT_INTERNAL = 4

#: Largest n accepted without --long-run.
N_CAP = 10**8

FIGURES = ("c_curve", "phi_curve", "extrema", "lnS_eta")


class _Num(str):
    """A formatted number; emitted unquoted in JSON."""


def num(value, digits: int) -> _Num:
    with mpmath.workdps(digits + 10):
        return _Num(mpmath.nstr(mpmath.mpf(value), digits, min_fixed=-4, max_fixed=digits + 1))


def fixed(value, decimals: int) -> _Num:
    with mpmath.workdps(decimals + 20):
        q = mpmath.nint(mpmath.mpf(value) * 10**decimals)
    s = str(abs(int(q))).rjust(decimals + 1, "0")
    sign = "-" if q < 0 else ""
    return _Num(f"{sign}{s[:-decimals]}.{s[-decimals:]}")


def render(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        lines = []
        for row in rows:
            parts = [f"{json.dumps(k)}: {v if isinstance(v, _Num) else json.dumps(v)}" for k, v in row.items()]
            lines.append("{" + ", ".join(parts) + "}")
        return "\n".join(lines) + "\n"
    if not rows:
        return ""
    header = list(rows[0])
    lines = [",".join(header)]
    lines += [",".join("" if row.get(h) is None else str(row[h]) for h in header) for row in rows]
    return "\n".join(lines) + "\n"


def write_output(text: str, output: str | None) -> None:
    if output is None:
        click.echo(text, nl=False)
        return
    path = Path(output)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_n(text: str) -> int:
    arg = mahler.LargeArgument.parse(text)
    if arg.value is None:
        raise DomainError(f"n = {text} is too large to handle exactly")
    return arg.value


def handled(fn):
    """Map package errors onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except MemoryBudgetExceeded as exc:
            click.echo(f"refused: {exc}", err=True)
            sys.exit(EXIT_RESOURCE)
        except (InconsistentResidues, AssertionError) as exc:
            click.echo(f"internal error: {exc}", err=True)
            sys.exit(EXIT_INTERNAL)
        except (DomainError, ValueError) as exc:
            click.echo(f"domain error: {exc}", err=True)
            sys.exit(EXIT_DOMAIN)
        except LagfibError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INTERNAL)

    return wrapper


def check_cap(n: int, long_run: bool, estimate: int) -> None:
    if n > N_CAP and not long_run:
        click.echo(f"refused: n = {n} exceeds the default cap {N_CAP}; estimated {estimate} bytes; pass --long-run to proceed", err=True)
        sys.exit(EXIT_RESOURCE)


def check_budget(estimate: int, budget: int) -> None:
    if estimate > budget:
        raise MemoryBudgetExceeded(estimate, budget)


_format_opt = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
_output_opt = click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Write here instead of stdout.")
_budget_opt = click.option(
    "--memory-budget",
    type=int,
    default=None,
    help=f"Bytes the exact engine may use (default from ${exact.MEMORY_BUDGET_ENV} or 3 GiB).",
)
_digits_opt = click.option("--digits", type=click.IntRange(15, 10_000), default=40, show_default=True)


@click.group()
@click.version_option(package_name="artifact")
def cli():
    """Lagged Fibonacci sequences a_k(n) = a_k(n-1) + a_k(n // k)."""


@cli.command("exact")
@click.option("--k", type=click.IntRange(2), required=True)
@click.option("--n", "n_text", required=True, help="Index, e.g. 1000, 10^7 or 2**20.")
@click.option("--residues", is_flag=True, help="Print residues modulo the planned primes instead of the value.")
@click.option("--engine", type=click.Choice(["auto", "exact", "residue"]), default="auto", show_default=True)
@click.option("--long-run", is_flag=True, help=f"Allow n beyond {N_CAP} and enable checkpointing.")
@click.option("--checkpoint", type=click.Path(dir_okay=False), default=None, help="Checkpoint file (with --long-run).")
@click.option("--checkpoint-every", type=click.IntRange(1), default=10**8, show_default=True)
@_budget_opt
@handled
def cmd_exact(k, n_text, residues, engine, long_run, checkpoint, checkpoint_every, memory_budget):
    """Print a_k(n) as an exact decimal (or its residues)."""
    n = parse_n(n_text)
    if n < 0:
        raise DomainError("n must be nonnegative")
    budget = exact.memory_budget(memory_budget)
    if engine == "auto":
        engine = "residue" if residues or n > phi.EXACT_MODE_LIMIT else "exact"
    if residues and engine == "exact":
        raise DomainError("--residues needs the residue engine")
    moduli = exact.plan_moduli(k, n, with_prefix=False) if engine == "residue" else None
    estimate = exact.SequenceWindow.estimate_bytes(k, n, moduli)
    check_cap(n, long_run, estimate)
    check_budget(estimate, budget)

    win = None
    if checkpoint and long_run and os.path.exists(checkpoint):
        win = exact.SequenceWindow.load(checkpoint, memory_budget_bytes=budget)
        if win.k != k or win.capacity != n or win.moduli != moduli:
            raise DomainError("checkpoint does not match this run")
    if win is None:
        win = exact.SequenceWindow(k, n, moduli, memory_budget_bytes=budget)
    if checkpoint and long_run:
        win.advance(n, checkpoint_path=checkpoint, checkpoint_every=checkpoint_every)
    else:
        win.advance(n)
    if residues:
        for p, r in zip(win.moduli, win.current):
            click.echo(f"{p} {int(r)}")
    else:
        click.echo(str(win.to_int(win.current)))


@cli.command("table1")
@click.option("--k", type=click.IntRange(2), default=2, show_default=True)
@click.option("--n-max", "n_max_text", default="10^6", show_default=True, help="Largest row; rows are 10^1 .. n-max.")
@click.option("--decimals", type=click.IntRange(1, 30), default=5, show_default=True)
@click.option("--long-run", is_flag=True, help=f"Allow rows beyond {N_CAP}.")
@_digits_opt
@_format_opt
@_output_opt
@_budget_opt
@handled
def cmd_table1(k, n_max_text, decimals, long_run, digits, fmt, output, memory_budget):
    """Exact c_k(n) next to the series approximant b_k(n) at powers of ten."""
    n_max = parse_n(n_max_text)
    rows_n = []
    n = 10
    while n <= n_max:
        rows_n.append(n)
        n *= 10
    if not rows_n:
        raise DomainError("n-max must be at least 10")
    top = rows_n[-1]
    moduli = exact.plan_moduli(k, top, with_prefix=True) if top > phi.EXACT_MODE_LIMIT else None
    estimate = exact.SequenceWindow.estimate_bytes(k, top, moduli)
    check_cap(top, long_run, estimate)
    ctx = PrecisionContext(digits)
    values = exact.exact_ratios(k, rows_n, ctx, moduli=moduli, memory_budget_bytes=exact.memory_budget(memory_budget))
    rows = []
    for n in rows_n:
        c = values[n][2]
        bv = mahler.b(k, n, ctx)
        rows.append({"n": n, "c": fixed(c, decimals), "b": fixed(bv, decimals)})
    write_output(render(rows, fmt), output)


@cli.command("table2")
@click.option("--k", "ks", type=click.IntRange(2), multiple=True, default=(2, 3), show_default=True)
@click.option("--j-max", type=click.IntRange(1), default=4, show_default=True)
@click.option("--include-j0", is_flag=True, help="Add the j = 0 row (alpha_0).")
@click.option("--conjugates", is_flag=True, help="Add rows for -j and check alpha_{-j} = conj(alpha_j).")
@click.option("--sig", type=click.IntRange(1, 50), default=6, show_default=True, help="Significant digits.")
@_digits_opt
@_format_opt
@_output_opt
@handled
def cmd_table2(ks, j_max, include_j0, conjugates, sig, digits, fmt, output):
    """Magnitudes of the Fourier coefficients alpha_j(k).

    ``abs_alpha`` is |alpha_j| including the 1/ln k factor; ``abs_gamma_zeta``
    is ln k |alpha_j| = |Gamma(chi_j) zeta(1 + chi_j)|, the normalisation in
    which these magnitudes are usually tabulated.
    """
    ctx = PrecisionContext(digits)
    rows = []
    for k in ks:
        js = ([0] if include_j0 else []) + list(range(1, j_max + 1))
        for j in js:
            a = debruijn.alpha(k, j, ctx)
            row = {
                "k": k,
                "j": j,
                "abs_alpha": num(abs(a), sig),
                "abs_gamma_zeta": num(debruijn.gamma_zeta_abs(k, j, ctx), sig),
                "re": num(a.real, sig),
                "im": num(a.imag, sig),
            }
            rows.append(row)
            if conjugates and j:
                b = debruijn.alpha(k, -j, ctx)
                with ctx.work():
                    ok = abs(b - mpmath.conj(a)) <= 10 * ctx.eps * abs(a)
                if not ok:
                    raise AssertionError(f"alpha_{-j}({k}) is not the conjugate of alpha_{j}({k})")
                rows.append({**row, "j": -j, "re": num(b.real, sig), "im": num(b.imag, sig)})
    write_output(render(rows, fmt), output)


@cli.command("figure")
@click.argument("name", type=click.Choice(FIGURES))
@click.option("--k", type=click.IntRange(2), default=2, show_default=True)
@click.option("--n-min", "n_min_text", default="10^3", show_default=True, help="Smallest n (phi_curve, extrema).")
@click.option("--n-max", "n_max_text", default=None, help="Largest exact n [c_curve 10^6, phi_curve 10^6, extrema 10^8].")
@click.option("--per-decade", type=click.IntRange(1), default=20, show_default=True, help="c_curve points per decade.")
@click.option("--b-max-exp", type=click.IntRange(2), default=1000, show_default=True, help="c_curve: b rows at n = 2^m up to this m.")
@click.option("--b-step", type=click.IntRange(1), default=10, show_default=True)
@click.option("--points-per-half-period", type=click.IntRange(3), default=40, show_default=True)
@click.option("--fit-n-min", "fit_n_min_text", default="10^4", show_default=True, help="extrema: smallest n entering the fits.")
@click.option("--eta-lo", type=float, default=0.02, show_default=True)
@click.option("--eta-hi", type=float, default=0.35, show_default=True)
@click.option("--eta-count", type=click.IntRange(2), default=34, show_default=True)
@click.option("--sig", type=click.IntRange(3, 50), default=12, show_default=True, help="Significant digits in the output.")
@click.option("--long-run", is_flag=True, help=f"Allow n beyond {N_CAP}.")
@_digits_opt
@_format_opt
@_output_opt
@_budget_opt
@handled
def cmd_figure(name, k, n_min_text, n_max_text, per_decade, b_max_exp, b_step, points_per_half_period, fit_n_min_text,
               eta_lo, eta_hi, eta_count, sig, long_run, digits, fmt, output, memory_budget):
    """Data behind the figures.

    \b
    c_curve   n, c, b           (c from exact values, b also at n = 2^m)
    phi_curve n, x, phi         (phase-uniform grid)
    extrema   x, value, kind, n, mu0, mu1, mu2, residual
    lnS_eta   eta, exact, order_-2 .. order_2, asymptote   (ln S / ln^2 n)
    """
    ctx = PrecisionContext(digits)
    budget = exact.memory_budget(memory_budget)
    default_max = {"c_curve": "10^6", "phi_curve": "10^6", "extrema": "10^8"}
    n_max = parse_n(n_max_text or default_max.get(name, "10^6"))
    if name in ("c_curve", "phi_curve", "extrema"):
        moduli = exact.plan_moduli(k, n_max, with_prefix=name == "c_curve") if n_max > phi.EXACT_MODE_LIMIT else None
        check_cap(n_max, long_run, exact.SequenceWindow.estimate_bytes(k, n_max, moduli))

    if name == "c_curve":
        ns = sorted({round(10 ** (i / per_decade)) for i in range(per_decade, int(per_decade * mpmath.log10(n_max)) + 1)})
        ns = [n for n in ns if 2 <= n <= n_max]
        values = exact.exact_ratios(k, ns, ctx, moduli=moduli, memory_budget_bytes=budget)
        rows = [{"n": n, "c": num(values[n][2], sig), "b": num(mahler.b(k, n, ctx), sig)} for n in ns]
        for m in range(b_step, b_max_exp + 1, b_step):
            if k**m > n_max:
                arg = mahler.LargeArgument.parse(f"{k}^{m}")
                rows.append({"n": f"{k}^{m}", "c": None, "b": num(mahler.b(k, arg, ctx), sig)})
    elif name == "phi_curve":
        ns = phi.phase_grid(k, parse_n(n_min_text), n_max, points_per_half_period)
        samples = phi.sample_phi(k, ns, ctx, memory_budget_bytes=budget)
        rows = [{"n": s.n, "x": num(s.x, sig), "phi": num(s.phi, sig)} for s in samples]
    elif name == "extrema":
        res = phi.analyze_phi(
            k,
            n_max,
            n_sample_min=parse_n(n_min_text),
            n_fit_min=parse_n(fit_n_min_text),
            points_per_half_period=points_per_half_period,
            ctx=ctx,
            memory_budget_bytes=budget,
        )
        fits = {"max": res.fit_max, "min": res.fit_min}
        rows = []
        for e in res.extrema:
            f = fits[e.kind]
            rows.append(
                {
                    "x": num(e.x, sig),
                    "value": num(e.value, sig),
                    "kind": e.kind,
                    "n": e.n,
                    "mu0": num(f.mu0, sig),
                    "mu1": num(f.mu1, sig),
                    "mu2": num(f.mu2, sig),
                    "residual": num(f.residual, sig),
                }
            )
    else:
        rows = []
        for eta, ex, *approx, asym in saddle.fig4_rows(k, saddle.eta_grid(eta_lo, eta_hi, eta_count), ctx):
            row = {"eta": num(eta, sig), "exact": num(ex, sig)}
            row.update({f"order_{o}": num(v, sig) for o, v in zip(saddle.ORDERS, approx)})
            row["asymptote"] = num(asym, sig)
            rows.append(row)
    write_output(render(rows, fmt), output)


def main(argv=None):
    cli.main(args=argv, prog_name="lagfib")


if __name__ == "__main__":
    main()
