"""Command-line interface.

Exit codes: 0 on success, 1 on any input or precondition error, 2 when a
classification verdict is inconclusive.  Errors are reported on stderr as a
single ``error: <code>: <message>`` line.
"""

from __future__ import annotations

import functools
import json
import sys
import time

import click

from .catalog import CATALOG, catalog_get, load_operator
from .classifier import SphereSampler
from .compatibility import CompatibilityError, build_compatibility, verify_compatibility
from .operators import OperatorError, write_operator
from .report import classification_report, compatibility_report, dumps, exit_code, verdict_summary
from .subspace import TolerancePolicy


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


def _fail(code: str, message) -> int:
    click.echo(f"error: {code}: {_one_line(message)}", err=True)
    return 1


def _guarded(fn):
    """Map library exceptions to one-line errors and exit code 1."""
    from .lab.experiments import PreconditionError

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CliError as exc:
            return _fail(exc.code, exc)
        except PreconditionError as exc:
            return _fail(exc.name, str(exc).split(": ", 1)[-1])
        except CompatibilityError as exc:
            code = "not_elliptic" if exc.margin is not None else "interpolation"
            return _fail(code, exc)
        except OperatorError as exc:
            return _fail("invalid_operator", exc)
        except (OSError, UnicodeDecodeError) as exc:
            return _fail("io", exc)
        except json.JSONDecodeError as exc:
            return _fail("invalid_json", exc)
        except ValueError as exc:
            return _fail("invalid_value", exc)
    return wrapper


def _load(ref: str):
    try:
        return load_operator(ref)
    except json.JSONDecodeError as exc:
        raise CliError("invalid_operator", f"{ref}: {exc}") from None
    except OSError as exc:
        raise CliError("unreadable_operator", f"{ref}: {exc.strerror or exc}") from None


def _write_text(path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


class _Group(click.Group):
    """Group whose usage errors follow the one-line error convention."""

    def main(self, args=None, prog_name=None, complete_var=None, **extra):
        extra.pop("standalone_mode", None)
        try:
            rv = super().main(args=args, prog_name=prog_name or "cancelkit",
                              complete_var=complete_var, standalone_mode=False, **extra)
        except click.ClickException as exc:
            _fail("usage", exc.format_message())
            sys.exit(1)
        except click.Abort:
            _fail("aborted", "interrupted")
            sys.exit(1)
        sys.exit(rv if isinstance(rv, int) else 0)


@click.group(cls=_Group)
@click.version_option(package_name="cancelkit", prog_name="cancelkit")
def cli():
    """Classify differential operators and run the inequality experiments."""


@cli.command()
@click.option("--operator", "ref", required=True, help="Operator file or catalog:NAME[:k=v,...].")
@click.option("--samples", default=512, show_default=True, help="Sphere directions per round.")
@click.option("--rounds", default=8, show_default=True, help="Maximum sampling rounds.")
@click.option("--tol", default=1e-9, show_default=True, help="Relative rank tolerance.")
@click.option("--seed", default=0, show_default=True)
@click.option("--quad-points", default=64, show_default=True, help="Weak-cancellation quadrature size.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Write the JSON report here.")
@click.option("--timing", is_flag=True, help="Include wall-clock time (breaks byte-identical reruns).")
@_guarded
def classify(ref, samples, rounds, tol, seed, quad_points, report_path, timing):
    """Ellipticity, cancellation, cocancellation and weak cancellation verdicts."""
    op = _load(ref)
    if samples < 1 or rounds < 1:
        raise CliError("invalid_params", "--samples and --rounds must be positive")
    if not 0 < tol < 1:
        raise CliError("invalid_params", f"--tol must lie in (0, 1), got {tol}")
    pol = TolerancePolicy(rank_rel_tol=tol)
    sampler = SphereSampler(op.n, count_per_round=samples, max_rounds=rounds, seed=seed)
    doc = classification_report(op, ref, sampler, pol, quad_points, seed, timing)
    text = dumps(doc)
    if report_path:
        _write_text(report_path, text)
        for prop, value in verdict_summary(doc["verdicts"]).items():
            click.echo(f"{prop}: {value}")
    else:
        click.echo(text, nl=False)
    return exit_code(doc["verdicts"])


@cli.command()
@click.option("--operator", "ref", required=True, help="Operator file or catalog:NAME[:k=v,...].")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Where to write the compatibility operator.")
@click.option("--verify-trials", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False),
              help="Write the verification report here instead of stdout.")
@click.option("--timing", is_flag=True, help="Include wall-clock time.")
@_guarded
def compat(ref, out_path, verify_trials, seed, report_path, timing):
    """Build the compatibility operator L(D) with ker L(xi) = A(xi)[V]."""
    op = _load(ref)
    if verify_trials < 1:
        raise CliError("invalid_params", "--verify-trials must be positive")
    t0 = time.perf_counter()
    l, info = build_compatibility(op, seed=seed, return_info=True)
    pol = TolerancePolicy()
    check = verify_compatibility(op, l, verify_trials, seed, pol)
    write_operator(l, out_path)
    doc = compatibility_report(op, ref, l, info, check, seed, pol,
                               time.perf_counter() - t0 if timing else None)
    text = dumps(doc)
    if report_path:
        _write_text(report_path, text)
        click.echo(f"wrote {out_path} (degree {l.k}{', zero operator' if l.is_zero else ''})")
    else:
        click.echo(text, nl=False)
    if not check.passed:
        return _fail("verification_failed",
                     f"annihilation {check.annihilation:.3e}, projector distance {check.projector_distance:.3e}")
    return 0


@cli.command()
@click.argument("kind", type=click.Choice(
    ["sobolev", "hardy", "fractional", "p2", "blowup", "duality", "divfree-growth", "circulation"]))
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
              help="Experiment configuration (JSON).")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Write rows here instead of stdout.")
@_guarded
def experiment(kind, config_path, csv_path):
    """Run one inequality experiment and emit CSV rows."""
    from .lab.config import load_config, rows_to_csv, run_experiment

    cfg = load_config(config_path)
    rows = run_experiment(kind, cfg)
    text = rows_to_csv(rows)
    target = csv_path or cfg.output
    if target:
        _write_text(target, text)
        click.echo(f"wrote {len(rows)} rows to {target}")
    else:
        click.echo(text, nl=False)
    return 0


@cli.group("catalog")
def catalog_group():
    """Named operators."""


@catalog_group.command("list")
def catalog_list():
    """Names, parameters and (n, k, dim_v, dim_e) at default parameters."""
    for name, (_, schema, defaults) in CATALOG.items():
        op = catalog_get(name)
        params = ", ".join(f"{k}: {v}" for k, v in schema.items()) or "-"
        dflt = ",".join(f"{k}={v}" for k, v in defaults.items())
        click.echo(f"{name:<14} ({op.n},{op.k},{op.dim_v},{op.dim_e})  defaults {dflt:<10} params {params}")
    return 0


def main(argv=None):
    cli.main(args=argv)


if __name__ == "__main__":  # pragma: no cover
    main()
