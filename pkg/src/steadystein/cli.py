"""Command-line entry point: ``steadystein table|verify|md-curve``."""
from __future__ import annotations

import io
import json
import math
import os
import sys

import click

from . import __version__
from . import suites as S
from . import tables as T
from .errors import NumericError, PreconditionError, StabilityError, TruncationError

EXIT_ASSERTION = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.12g}"
    return str(v)


def render_csv(table: T.Table, extra_meta: dict | None = None) -> str:
    meta = {"table": table.name, **table.meta, **(extra_meta or {}), "version": __version__}
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={_fmt(v)}\n")
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jobs(jobs: int | None) -> int:
    if jobs is not None:
        return max(1, jobs)
    env = os.environ.get("STEADYSTEIN_JOBS")
    return max(1, int(env)) if env else 1


def _guard(fn):
    """Translate library errors into the documented exit codes."""
    try:
        return fn()
    except (PreconditionError, StabilityError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except (NumericError, TruncationError) as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)


@click.group()
@click.version_option(__version__)
def main():
    """Exact steady states of many-server queues versus their diffusion approximations."""


@main.command()
@click.argument("table_id", type=click.Choice(sorted(T.TABLES)))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default stdout).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=None, help="Worker count (falls back to STEADYSTEIN_JOBS).")
@click.option("--tail-eps", type=float, default=1e-12, show_default=True,
              help="Truncation mass for the two-phase chain.")
@click.option("--n", "ns", type=int, multiple=True, help="Server counts (md and ph tables).")
@click.option("--rho", type=float, default=0.6, show_default=True, help="Utilization (md).")
@click.option("--z", type=float, default=2.4, show_default=True, help="Tail threshold (md).")
@click.option("--steps", type=int, default=None, help="Euler steps per replication (ph).")
@click.option("--reps", type=int, default=None, help="Replications (ph).")
@click.option("--burnin", type=float, default=None, help="Burn-in time per replication (ph).")
@click.option("--dt", type=float, default=None, help="Euler step size (ph).")
@click.option("--alpha", type=float, default=1.0, show_default=True, help="Abandonment rate (ph).")
@click.option("--exact-max-n", type=int, default=None,
              help="Largest n solved exactly; larger rows use event simulation (ph).")
def table(table_id, out, seed, jobs, tail_eps, ns, rho, z, steps, reps, burnin, dt, alpha, exact_max_n):
    """Write one comparison table as CSV."""
    workers = _jobs(jobs)

    def run():
        if table_id == "md":
            return T.md(ns or T.MD_NS, rho, z, jobs=workers)
        if table_id == "ph":
            base = T.PhSettings()
            settings = T.PhSettings(
                alpha=alpha, tail_eps=tail_eps, seed=seed, jobs=workers,
                steps=steps or base.steps, replications=reps or base.replications,
                burn_in=base.burn_in if burnin is None else burnin, dt=dt or base.dt,
                exact_max_n=base.exact_max_n if exact_max_n is None else exact_max_n)
            return T.ph(ns or T.PH_NS, settings)
        return T.TABLES[table_id](jobs=workers)

    result = _guard(run)
    extra = {"seed": seed} if table_id == "ph" else {}
    _emit(render_csv(result, extra), out)


@main.command("md-curve")
@click.option("--n", type=int, default=100, show_default=True)
@click.option("--rho", type=float, default=0.9, show_default=True)
@click.option("--z-max", type=float, default=8.0, show_default=True)
@click.option("--z-min", type=float, default=None, help="First threshold (at least -zeta + delta).")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def md_curve(n, rho, z_max, z_min, out):
    """Relative tail-probability errors of both diffusions as the threshold grows."""
    result = _guard(lambda: T.md_curve(n, rho, z_max, z_min))
    _emit(render_csv(result), out)


VERIFY_SUITES = ("bar", "moments", "gradients", "mgf", "ssc", "density-bounds", "theorem-bounds")


@main.command()
@click.argument("suite", type=click.Choice(VERIFY_SUITES))
@click.option("--model", type=click.Choice(["erlang_c", "erlang_a", "mphn"]), default="erlang_c",
              show_default=True, help="Model for theorem-bounds.")
@click.option("--preset", type=click.Choice(["h2", "c2", "e2", "exponential"]), default="h2",
              show_default=True, help="Service distribution for ssc.")
@click.option("--samples", type=float, default=1e5, show_default=True, help="Queue snapshots for ssc.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=None)
@click.option("--tail-eps", type=float, default=None, help="Truncation mass for exact distributions.")
@click.option("--steps", type=int, default=None, help="Euler steps per replication (mphn trend).")
@click.option("--reps", type=int, default=None, help="Replications (mphn trend).")
@click.option("--burnin", type=float, default=None, help="Burn-in time (mphn trend).")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def verify(suite, model, preset, samples, seed, jobs, tail_eps, steps, reps, burnin, out):
    """Run a verification suite; JSON lines on output, exit 0 only if everything holds."""
    workers = _jobs(jobs)

    def run():
        if suite == "bar":
            return S.suite_bar(tail_eps=tail_eps or 1e-40)
        if suite == "moments":
            return S.suite_moments(tail_eps=tail_eps or 1e-14)
        if suite == "ssc":
            return S.suite_ssc(preset=preset, samples=samples, seed=seed, jobs=workers)
        if suite == "theorem-bounds":
            if model == "erlang_a":
                return S.suite_trend_erlang_a()
            if model == "mphn":
                base = T.PhSettings()
                settings = T.PhSettings(seed=seed, jobs=workers, steps=steps or base.steps,
                                        replications=reps or base.replications,
                                        burn_in=base.burn_in if burnin is None else burnin)
                return S.trend_c2(settings=settings)
            return S.suite_theorem_bounds_c()
        return S.SUITES[suite]()

    result = _guard(run)
    lines = [json.dumps({"suite": result.suite, **row}, sort_keys=True) for row in result.rows]
    lines.append(json.dumps({"suite": result.suite, "summary": result.summary,
                             "passed": result.passed}, sort_keys=True))
    _emit("\n".join(lines) + "\n", out)
    if not result.passed:
        click.echo(f"{suite}: FAIL", err=True)
        sys.exit(EXIT_ASSERTION)
    click.echo(f"{suite}: PASS", err=True)


if __name__ == "__main__":
    main()
