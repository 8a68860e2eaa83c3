"""Command line entry point: ``pulsepair <command> ...``."""

from __future__ import annotations

import logging
from pathlib import Path

import typer

from .config import load_config
from .errors import ConfigError, DataError, PulsePairError, StageError
from .pipeline import run_pipeline, verify_manifest
from .selftest import run_selftest

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

app = typer.Typer(
    help="Search dual-polarization spectrograms for quantized pulse pairs.",
    no_args_is_help=True,
    add_completion=False,
)


@app.callback()
def _setup(verbose: bool = typer.Option(False, "--verbose", "-v", help="Log per-segment detail (DEBUG)")):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _exit_code(error: BaseException) -> int:
    cause = error.cause if isinstance(error, StageError) else error
    if isinstance(cause, ConfigError):
        return EXIT_CONFIG
    if isinstance(cause, DataError):
        return EXIT_DATA
    return EXIT_INTERNAL


def _run(stage: str, config: Path, workers: int | None, seed: int | None, label: str | None = None) -> None:
    label = label or stage
    try:
        cfg = load_config(config).with_overrides(workers=workers, seed=seed)
        typer.echo(f"🚀 {label}: {config} -> {cfg.output_dir} (seed {cfg.seed}, {cfg.workers} worker(s))")
        manifest = run_pipeline(cfg, until=stage)
    except PulsePairError as e:
        typer.echo(f"❌ Error: {e}", err=True)
        raise typer.Exit(_exit_code(e))
    except Exception as e:
        typer.echo(f"❌ Unexpected error: {type(e).__name__}: {e}", err=True)
        raise typer.Exit(EXIT_INTERNAL)
    for name in manifest.artifacts:
        typer.echo(f"  📄 {name}")
    typer.echo(f"✅ {label} done in {manifest.wall_clock_s:.1f}s, config {manifest.config_hash[:12]}")


_CONFIG = typer.Argument(..., help="Path to the JSON run configuration")
_WORKERS = typer.Option(None, "--workers", "-w", help="Worker processes (overrides config.workers)")
_SEED = typer.Option(None, "--seed", help="Master seed (overrides config.seed)")


@app.command()
def synth(config: Path = _CONFIG, workers: int = _WORKERS, seed: int = _SEED):
    """Generate the scenario's PPF1 segments (or check the configured inputs)."""
    _run("synth", config, workers, seed)


@app.command()
def detect(config: Path = _CONFIG, workers: int = _WORKERS, seed: int = _SEED):
    """Run up to pulse detection and write pulses.csv."""
    _run("detect", config, workers, seed)


@app.command()
def pair(config: Path = _CONFIG, workers: int = _WORKERS, seed: int = _SEED):
    """Run up to pulse pairing and write pairs.csv."""
    _run("pair", config, workers, seed)


@app.command()
def analyze(config: Path = _CONFIG, workers: int = _WORKERS, seed: int = _SEED):
    """Run up to filtering and scoring (events, rejections, likelihood, summary)."""
    _run("analyze", config, workers, seed)


@app.command()
def report(config: Path = _CONFIG, workers: int = _WORKERS, seed: int = _SEED):
    """Run up to figure generation."""
    _run("report", config, workers, seed)


@app.command()
def run(config: Path = _CONFIG, workers: int = _WORKERS, seed: int = _SEED):
    """Run the full pipeline."""
    _run("report", config, workers, seed, label="run")


@app.command()
def selftest():
    """Check the built-in oracle fixtures (sidereal time, binomial, lattice, PPF1)."""
    checks = run_selftest()
    for c in checks:
        typer.echo(f"{'✅' if c.ok else '❌'} {c.name}: {c.detail}")
    failed = sum(not c.ok for c in checks)
    if failed:
        typer.echo(f"Error: {failed} of {len(checks)} checks failed.", err=True)
        raise typer.Exit(EXIT_INTERNAL)
    typer.echo(f"🎉 all {len(checks)} checks passed")


@app.command()
def verify(output_dir: Path = typer.Argument(..., help="Directory holding manifest.json")):
    """Re-check every digest in a run's manifest."""
    problems = verify_manifest(output_dir)
    for p in problems:
        typer.echo(f"❌ {p}")
    if problems:
        raise typer.Exit(EXIT_DATA)
    typer.echo(f"✅ {output_dir} verified")


def main():
    app()


if __name__ == "__main__":
    main()
