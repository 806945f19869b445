"""Command-line entry point.

    hicontrast SUBCOMMAND [--config PATH] [--set section.field=value ...]
               [--out DIR] [--threads N]

Each invocation writes into a fresh timestamped directory under ``--out``
(or ``output.directory``).  Report files embed the resolved configuration
and its SHA-256 hash and carry no timestamps, so identical configurations
give byte-identical reports.  Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime
from pathlib import Path

SUBCOMMANDS = ("inclusion-spectrum", "beta", "gaps", "homogenize", "defect-modes", "validate-eps",
               "pipeline")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hicontrast", description=__doc__.split("\n\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, default=None, help="YAML run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.FIELD=VALUE",
                   help="override one configuration field (repeatable)")
    p.add_argument("--out", type=Path, default=None, help="parent directory for run directories")
    p.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread count")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def new_run_dir(parent: Path, subcommand: str) -> Path:
    """Timestamped directory; never reuses an existing one."""
    parent.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    base = parent / f"{stamp}-{subcommand}"
    path, k = base, 1
    while True:
        try:
            path.mkdir()
            return path
        except FileExistsError:
            k += 1
            path = Path(f"{base}-{k}")


def run(subcommand, config_path=None, overrides=(), out=None, log=None) -> tuple[int, Path | None]:
    """Run one subcommand; returns (exit status, run directory)."""
    from hicontrast import runner
    from hicontrast.config import load
    from hicontrast.errors import ConfigError, HicontrastError

    say = log or (lambda msg: print(msg, file=sys.stderr))
    try:
        cfg = load(config_path, overrides)
    except ConfigError as exc:
        say(f"config error: {exc}")
        return EXIT_CONFIG, None
    run_dir = new_run_dir(Path(out) if out is not None else Path(cfg.output.directory), subcommand)
    stage = subcommand
    try:
        ctx = runner.Context(cfg, run_dir, say)
        if subcommand == "pipeline":
            for stage in runner.pipeline_stages(cfg):
                runner.STAGES[stage](ctx)
        else:
            runner.STAGES[subcommand](ctx)
    except ConfigError as exc:
        say(f"config error in {stage}: {exc}")
        return EXIT_CONFIG, run_dir
    except HicontrastError as exc:
        say(f"numerical failure in {stage} ({type(exc).__module__}.{type(exc).__name__}): {exc}")
        return EXIT_NUMERICAL, run_dir
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        say(f"numerical failure in {stage} ({type(exc).__name__}): {exc}")
        return EXIT_NUMERICAL, run_dir
    say(f"reports written to {run_dir}")
    return EXIT_OK, run_dir


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("config error: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    import logging

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    status, _ = run(args.subcommand, args.config, args.overrides, args.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
