#!/usr/bin/env python3
"""
GANICE laboratory command line
Verbs: run, rate-study, plot-data, validate-config
"""

import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from config.experiment_config import DatasetKind, ExperimentConfig, load_experiment_config
from core.errors import ConfigValidationError, DataIOError, GaniceError
from core.logging_config import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flags that map onto config keys."""
    overrides: Dict[str, Any] = {}
    if getattr(args, 'reps', None) is not None:
        overrides['repetitions'] = args.reps
    if getattr(args, 'seed', None) is not None:
        overrides['base_seed'] = args.seed
    if getattr(args, 'out', None) is not None:
        overrides['output_dir'] = args.out
    if getattr(args, 'threads', None) is not None:
        overrides['threads'] = args.threads
    if getattr(args, 'workers', None) is not None:
        overrides['workers'] = args.workers
    if getattr(args, 'jobs_data_dir', None) is not None:
        overrides['dataset'] = {'data_dir': args.jobs_data_dir}
    return overrides


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_experiment_config(args.config, _overrides(args))
    # explicit flag wins over GANICE_DATA_DIR
    if getattr(args, 'jobs_data_dir', None) and config.dataset.kind is DatasetKind.JOBS:
        config.dataset.data_dir = args.jobs_data_dir
    return config


def cmd_run(args: argparse.Namespace) -> int:
    from experiments.runner import replay, run_experiment

    if args.replay:
        result = replay(args.replay, args.out or 'replay')
        logger.info(f"Replay: identical={result.identical} differing={result.differing} "
                    f"fingerprints_match={result.fingerprints_match}")
        return EXIT_OK if result.exact and result.status == 0 else EXIT_FAILED
    config = _load(args)
    return run_experiment(config, source=args.config)


def cmd_rate_study(args: argparse.Namespace) -> int:
    from experiments.rate_study import run_rate_study

    config = _load(args)
    results = run_rate_study(config)
    for r in results:
        logger.info(f"{r.method}: slope={r.slope:.3f} interval=({r.interval[0]:.3f}, {r.interval[1]:.3f})")
    return EXIT_OK


def cmd_plot_data(args: argparse.Namespace) -> int:
    from experiments.plot_data import emit_plot_data

    result = emit_plot_data(args.results)
    for path in result.written:
        print(path)
    return EXIT_OK


def cmd_validate_config(args: argparse.Namespace) -> int:
    config = _load(args)
    print(f"Config '{config.name}' is valid: {config.dataset.kind.value}, "
          f"methods {[m.value for m in config.methods]}, {config.repetitions} repetitions")
    return EXIT_OK


def _add_config_flags(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument('--config', required=required, help='YAML or JSON experiment config')
    parser.add_argument('--reps', type=int, help='Number of repetitions')
    parser.add_argument('--seed', type=int, help='Base seed')
    parser.add_argument('--out', help='Output directory')
    parser.add_argument('--jobs-data-dir', help='Directory with the NBER Jobs files')
    parser.add_argument('--threads', type=int, help='BLAS threads per worker')
    parser.add_argument('--workers', type=int, help='Parallel repetitions')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='ganice', description='Distributional causal inference laboratory')
    parser.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING, ERROR')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run every repetition of an experiment')
    _add_config_flags(run, required=False)
    run.add_argument('--replay', help='Re-run from a manifest.json and compare metrics')
    run.set_defaults(handler=cmd_run)

    rate = sub.add_parser('rate-study', help='eW decay against training sample size')
    _add_config_flags(rate)
    rate.set_defaults(handler=cmd_rate_study)

    plot = sub.add_parser('plot-data', help='Write plot-ready CSVs for a results directory')
    plot.add_argument('results', help='Results directory of a finished run')
    plot.set_defaults(handler=cmd_plot_data)

    check = sub.add_parser('validate-config', help='Load and validate a config without running it')
    _add_config_flags(check)
    check.set_defaults(handler=cmd_validate_config)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == 'run' and not args.config and not args.replay:
        parser.error('run needs --config or --replay')
    setup_logging(log_level=args.log_level or os.getenv('LOG_LEVEL', 'INFO'))

    try:
        return args.handler(args)
    except ConfigValidationError as exc:
        print("Invalid configuration:", file=sys.stderr)
        for error in exc.errors:
            print(f"  - {error}", file=sys.stderr)
        if exc.offending_keys:
            print(f"Offending keys: {', '.join(exc.offending_keys)}", file=sys.stderr)
        return EXIT_INVALID
    except DataIOError as exc:
        print(f"Data error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except GaniceError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return EXIT_FAILED


if __name__ == '__main__':
    sys.exit(main())
