"""Command line interface"""

import logging
import sys
from pathlib import Path
from typing import Callable, Optional

import click

from janus.constants import CONFIG_PATH, JOBS, LOG_LEVEL, OUTPUT_DIR, PROFILE, SEED
from janus.experiments import STATUS_FAILED, ExperimentConfig, cmd_offline, cmd_report, cmd_run, cmd_snapshots
from janus.verification import run_verification

logger = logging.getLogger("cli")


def setup_logging(level: str = LOG_LEVEL) -> None:
    """Root handler shared by every janus logger"""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="[%(asctime)s] [%(name)s] [%(levelname)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def _guarded(action: Callable[[], None]) -> None:
    """Logs precondition failures and instabilities and exits nonzero"""
    try:
        action()
    except (ValueError, RuntimeError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        sys.exit(1)


def _config(ctx: click.Context) -> ExperimentConfig:
    options = ctx.obj
    return ExperimentConfig.load(
        options["config"],
        options["profile"],
        seed=options["seed"],
        jobs=options["jobs"],
        output_dir=options["out"],
    )


@click.group()
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=CONFIG_PATH, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None, help=f"Output directory [default: {OUTPUT_DIR}]")
@click.option("--profile", default=PROFILE, show_default=True, help="Profile of the config file (desk, paper, ...)")
@click.option("--seed", type=int, default=None, help=f"Seed of randomized checks [default: {SEED}]")
@click.option("--jobs", type=int, default=None, help=f"Worker processes [default: {JOBS}]")
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: Path,
    out: Optional[Path],
    profile: str,
    seed: Optional[int],
    jobs: Optional[int],
) -> None:
    """Partitioned FOM/ROM coupling experiments"""
    setup_logging()
    ctx.ensure_object(dict)
    ctx.obj.update({"config": config_path, "out": out, "profile": profile, "seed": seed, "jobs": jobs})


@cli.command()
@click.pass_context
def snapshots(ctx: click.Context) -> None:
    """Single-domain runs that provide the POD snapshots"""
    _guarded(lambda: logger.info("Wrote %d snapshot files", len(cmd_snapshots(_config(ctx)))))


@cli.command()
@click.pass_context
def offline(ctx: click.Context) -> None:
    """Interface and interior POD of both subdomains"""
    _guarded(lambda: logger.info("Wrote %d POD files", len(cmd_offline(_config(ctx)))))


@cli.command(name="run")
@click.pass_context
def run_sweep(ctx: click.Context) -> None:
    """Benchmark and the (formulation, basis size) sweep"""

    def action() -> None:
        summaries = cmd_run(_config(ctx))
        failed = [s for s in summaries if s["status"] == STATUS_FAILED]
        if failed:
            raise RuntimeError(f"{len(failed)} of {len(summaries)} sweep cells failed")

    _guarded(action)


@cli.command()
@click.pass_context
def report(ctx: click.Context) -> None:
    """Summary table of the sweep"""
    _guarded(lambda: logger.info("Report written to %s", cmd_report(_config(ctx))))


@cli.command()
@click.pass_context
def verify(ctx: click.Context) -> None:
    """Fast oracles of the partitioned scheme"""

    def action() -> None:
        options = ctx.obj
        out = options["out"] or Path(OUTPUT_DIR)
        results = run_verification(options["seed"] if options["seed"] is not None else SEED, out)
        failed = [r.name for r in results if not r.passed]
        if failed:
            raise RuntimeError(f"Failed checks: {', '.join(failed)}")
        logger.info("All %d checks passed", len(results))

    _guarded(action)
