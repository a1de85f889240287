"""Command-line entry point: ``narrowchan <kind> --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import (DivergenceError, InsufficientSampleError, NarrowChanError, OutputError,
                     SimulationFault, SingularSystemError)
from .experiments import KINDS, SEED_ENV_VAR, load_config, run_config, seed_from_environment

EXIT_OK, EXIT_USAGE, EXIT_FAULT = 0, 2, 3
NUMERIC_FAULTS = (SimulationFault, SingularSystemError, DivergenceError, InsufficientSampleError)


def _parser():
    p = argparse.ArgumentParser(prog="narrowchan", description="Run a configured experiment.")
    p.add_argument("kind", choices=KINDS, help="experiment kind; must match the config")
    p.add_argument("--config", required=True, type=Path, help="JSON config file")
    p.add_argument("--seed", type=int, default=None,
                   help=f"override the config seed (also ${SEED_ENV_VAR})")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--threads", type=int, default=None, help="Monte Carlo worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        seed, source = args.seed, "cli"
        if seed is None:
            seed, source = seed_from_environment(), "env"
        if seed is None:
            source = "config"
        cfg = load_config(args.config, seed)
        if cfg.kind != args.kind:
            raise NarrowChanError(f"config kind {cfg.kind!r} does not match {args.kind!r}")
        if args.threads is not None:
            import numba
            numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
    except NarrowChanError as exc:
        print(f"narrowchan: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        summary = run_config(cfg, args.out, source)
    except NUMERIC_FAULTS as exc:
        diag = {"error": type(exc).__name__, "message": str(exc),
                "diagnostics": getattr(exc, "diagnostics", {})}
        try:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "diagnostics.json").write_text(json.dumps(diag, indent=1, default=str))
        except OSError:
            pass
        print(f"narrowchan: numeric fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except (OutputError, NarrowChanError) as exc:
        print(f"narrowchan: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(summary, indent=1, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
