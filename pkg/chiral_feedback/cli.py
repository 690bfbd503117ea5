import argparse
import json
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from .errors import ConfigError, SimulationError
from .history import record_run
from .models import OutputOptions
from .recipes import figure_recipes, get_recipe
from .settings import get_settings
from .sweeps import load_config, run_config, write_result
from .validation import validate_cross_solver

logger = logging.getLogger("chiral_feedback")

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

RUN_MODES = ["steady", "evolve", "mps", "cavity", "dark-curve", "sweep"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="Driven V-atom chirally coupled to a waveguide with mirror feedback.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for mode in RUN_MODES:
        p = sub.add_parser(mode, help=f"run a '{mode}' configuration")
        source = p.add_mutually_exclusive_group(required=True)
        source.add_argument("--config", help="JSON run configuration")
        source.add_argument("--preset", help="built-in configuration (see 'sim presets')")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=["csv", "jsonl"], help="output format (default: from config)")
        p.add_argument("--threads", type=int, help="worker processes for sweeps (default: SIM_THREADS)")

    sub.add_parser("presets", help="list built-in configurations")

    v = sub.add_parser("validate", help="run the cross-solver acceptance checks")
    v.add_argument("--slow", action="store_true", help="include the long time-bin criteria")
    v.add_argument("--perturb-gamma-loss", type=float, default=None, help="extra gamma' injected as a negative control")
    v.add_argument("--out", help="write the JSON report here (default: stdout)")
    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _run(args: argparse.Namespace, threads: int) -> int:
    if args.preset:
        config = get_recipe(args.preset)
        if config.mode != args.command:
            raise ConfigError(f"Preset '{args.preset}' is a '{config.mode}' run, not '{args.command}'")
    else:
        config = load_config(args.config, mode=args.command)

    output = OutputOptions(
        path=args.out if args.out is not None else config.output.path,
        format=args.format or config.output.format,
    )
    result = run_config(config, threads=threads)
    for note in result.warnings:
        print(f"note: {note}", file=sys.stderr)
    written = write_result(result, output)
    record_run(config.mode, len(result.rows), written, preset=args.preset)
    return EXIT_OK


def _presets() -> int:
    for name, config in sorted(figure_recipes().items()):
        axes = ", ".join(a.name for a in config.grid) or "-"
        print(f"{name:12s} mode={config.mode:10s} engine={config.engine:6s} axes={axes}")
    return EXIT_OK


def _validate(args: argparse.Namespace) -> int:
    report = validate_cross_solver(slow=args.slow, perturb_gamma_loss=args.perturb_gamma_loss)
    text = json.dumps(report.model_dump(), indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    else:
        print(text)
    for c in report.criteria:
        status = "skip" if c.skipped else ("pass" if c.passed else "FAIL")
        print(f"[{status}] {c.id}. {c.name}: {c.detail}", file=sys.stderr)
    record_run("validate", len(report.criteria), args.out, passed=report.passed)
    return EXIT_OK if report.passed else EXIT_VALIDATION_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
    except ConfigError as e:
        _configure_logging("INFO")
        logger.error(str(e))
        return EXIT_CONFIG
    _configure_logging(settings.log_level)

    threads = getattr(args, "threads", None) or settings.threads
    if threads < 1:
        logger.error(f"--threads must be >= 1, got {threads}")
        return EXIT_CONFIG

    try:
        if args.command == "presets":
            return _presets()
        if args.command == "validate":
            return _validate(args)
        return _run(args, threads)
    except (ConfigError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except SimulationError:
        logger.exception("Simulation failed")
        return EXIT_NUMERICAL
