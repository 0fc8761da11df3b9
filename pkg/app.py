import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from config.settings import settings
from experiments.orchestrator import EXIT_OK, EXIT_VALIDATION, SUBCOMMANDS, ExperimentOrchestrator
from experiments.scenario import has_errors, validate
from lattice.errors import ScenarioError
from utils.state_manager import ComplexityCache

logger = logging.getLogger("branchlab")


class KeyValueFormatter(logging.Formatter):
    '''One record per line as key=value pairs'''

    def format(self, record: logging.LogRecord) -> str:
        message = record.getMessage().replace('"', "'")
        line = (f'time={self.formatTime(record)} level={record.levelname} '
                f'logger={record.name} msg="{message}"')
        if record.exc_info:
            line += f' exc="{self.formatException(record.exc_info)!r}"'
        return line


def configure_logging(level: Optional[str] = None):
    '''Install handlers from LOG_LEVEL / LOG_FILE; diagnostics go to stderr'''
    level = (level or settings.LOG_LEVEL).upper()
    if settings.ENABLE_STRUCTURED_LOGGING:
        formatter: logging.Formatter = KeyValueFormatter()
    else:
        formatter = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")

    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.LOG_FILE:
        handlers.append(logging.FileHandler(settings.LOG_FILE))

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    for handler in handlers:
        handler.setFormatter(formatter)
        root.addHandler(handler)
    root.setLevel(getattr(logging, level, logging.INFO))


def initialize_system(workers: Optional[int] = None, out_dir: Optional[str] = None) -> Dict[str, Any]:
    '''Validate settings and build the orchestrator'''
    config_validation = settings.validate_configuration()
    if not config_validation['valid']:
        for issue in config_validation['issues']:
            logger.warning("configuration issue: %s", issue)

    cache = ComplexityCache() if settings.CACHE_ENABLED else None
    if cache is not None:
        logger.debug("complexity cache at %s", cache.db_path)

    orchestrator = ExperimentOrchestrator(out_dir=out_dir, workers=workers, cache=cache)
    return {
        'orchestrator': orchestrator,
        'cache': cache,
        'configuration': config_validation,
    }


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonnegative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchlab",
        description="Complexity-based branch decompositions of small spin-lattice wavefunctions.",
    )
    parser.add_argument("--log-level", default=None, help="overrides LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    for name in SUBCOMMANDS:
        command = commands.add_parser(name, help=f"run the {name} experiment on a scenario")
        command.add_argument("--scenario", required=True, help="path to a scenario JSON file")
        command.add_argument("--seed", type=_seed, default=None, help="overrides the scenario seed")
        command.add_argument("--mode", choices=("exact", "heuristic"), default=None,
                             help="complexity oracle mode")
        command.add_argument("--budget", type=_nonnegative, default=None, help="oracle cost budget")
        command.add_argument("--workers", type=_positive, default=None,
                             help="caps parallelism; results do not depend on it")
        command.add_argument("--out", default=None, help="output directory")

    check = commands.add_parser("validate", help="print scenario diagnostics without running")
    check.add_argument("--scenario", required=True)
    return parser


def run_validate(path: str) -> int:
    try:
        diagnostics = validate(path)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    for item in diagnostics:
        print(f"{item['severity']}: {item['field']}: {item['message']}")
    if not diagnostics:
        print(f"{path}: ok")
    return EXIT_VALIDATION if has_errors(diagnostics) else EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    if args.command == "validate":
        return run_validate(args.scenario)

    system = initialize_system(workers=args.workers, out_dir=args.out)
    overrides = {"seed": args.seed, "oracle.mode": args.mode, "oracle.budget": args.budget}
    outcome = system['orchestrator'].run(args.command, args.scenario, overrides)
    if outcome.success:
        for path in outcome.artifacts:
            print(path)
    return outcome.exit_code


if __name__ == '__main__':
    sys.exit(main())
