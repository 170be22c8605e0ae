# metriclab/commands.py
import json
import logging
import os
import sys

import click

from . import __version__, cache
from .config import Config
from .errors import ConfigError, DomainError, DomainSpecError, NumericalError
from .experiments import build_config, list_experiments, parse_config, run_experiment
from .utils.reports import emit_report

EXIT_PASS = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _setup_logging():
    logging.basicConfig(
        level=getattr(logging, Config.LOG_LEVEL, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@click.group()
@click.version_option(__version__, prog_name="metriclab")
def cli():
    """Invariant metrics laboratory."""
    Config.reload()
    try:
        Config.validate()
    except RuntimeError as e:
        click.echo(str(e), err=True)
        sys.exit(EXIT_CONFIG)
    _setup_logging()


@cli.command("run")
@click.argument("experiment")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Experiment config JSON; defaults apply when omitted")
@click.option("--out", "out_dir", default=None, help="Report directory")
@click.option("--seed", type=int, default=None, help="Overrides grid.seed and fan.seed")
@click.option("--degree-cap", type=int, default=None, help="Bergman series truncation")
@click.option("--pdf", is_flag=True, help="Also write a PDF summary")
def run_command(experiment, config_path, out_dir, seed, degree_cap, pdf):
    experiment = experiment.strip().lower()
    try:
        if config_path:
            config = parse_config(config_path, degree_cap=degree_cap)
            if config.experiment != experiment:
                raise ConfigError(
                    f"Config is for {config.experiment!r} but {experiment!r} was requested"
                )
        else:
            config = build_config({"experiment": experiment}, degree_cap=degree_cap)
        if seed is not None:
            data = config.as_dict()
            data["grid"]["seed"] = seed
            data["fan"]["seed"] = seed
            config = build_config(data)
    except (ConfigError, DomainSpecError) as e:
        click.echo(f"Config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)

    try:
        report = run_experiment(config)
    except (ConfigError, DomainSpecError, DomainError) as e:
        click.echo(f"Config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except NumericalError as e:
        click.echo(f"Numerical failure: {type(e).__name__}: {e}", err=True)
        sys.exit(EXIT_NUMERICAL)

    target = out_dir or os.path.join(config.output_dir, config.experiment)
    try:
        written = emit_report(report, target, pdf=pdf)
    except OSError as e:
        click.echo(f"Cannot write report to {target}: {e}", err=True)
        sys.exit(EXIT_CONFIG)

    for path in written:
        click.echo(f"Wrote {path}")
    for verdict in report.verdicts:
        mark = "pass" if verdict.passed else "FAIL"
        click.echo(f"  [{mark}] {verdict.name} ({verdict.kind}, tol {verdict.tolerance:g})")

    if not report.passed:
        click.echo(f"Failed assertions: {', '.join(report.failed)}")
        sys.exit(EXIT_ASSERTION)
    click.echo("All assertions passed.")


@cli.command("list")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output")
def list_command(as_json):
    rows = list_experiments()
    if as_json:
        click.echo(json.dumps(rows, indent=2))
        return
    width = max(len(r["name"]) for r in rows)
    for r in rows:
        click.echo(f"{r['name']:<{width}}  {r['spec']:<14}  {r['anchor']}")


@cli.group("cache")
def cache_group():
    """Kernel-series cache maintenance."""


@cache_group.command("clear")
def cache_clear():
    removed = cache.clear()
    click.echo(f"Removed {removed} cached series from {Config.CACHE_DIR}")


__all__ = ["cli"]
