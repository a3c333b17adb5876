"""
Main entry point for the AC/MTDC optimal power flow toolkit
"""
import argparse
import sys
from typing import List, Optional

from loguru import logger

from config import Config, RunConfig
from handlers.accuracy import cmd_accuracy
from handlers.evaluate import cmd_evaluate
from handlers.gbd import cmd_gbd
from handlers.solve import cmd_solve
from handlers.validate import cmd_export, cmd_validate

COMMANDS = {
    "solve": cmd_solve,
    "gbd": cmd_gbd,
    "evaluate": cmd_evaluate,
    "accuracy": cmd_accuracy,
    "validate": cmd_validate,
    "export": cmd_export,
}


def setup_logging(level: Optional[str] = None) -> None:
    """Coloured console sink plus a rotating file sink"""
    level = level or Config.LOG_LEVEL
    logger.remove()
    logger.add(
        sys.stderr,
        level=level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
    )
    logger.add(
        Config.LOG_FILE,
        rotation="1 day",
        retention="30 days",
        level=level,
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"
    )


def _ratios(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(":", ",").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ratios like 1:2:4, got '{text}'") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtdc-opf", description="Robust AC/MTDC OPF with DC topology switching")
    parser.add_argument("--log-level", default=None, help="loguru level (default from LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", default="fig4", help="case file path or bundled case name")
    common.add_argument("--mode", default="eropf", choices=RunConfig.MODES)
    common.add_argument("--segments", type=int, default=Config.POLYGON_SEGMENTS, help="polygon segments N")
    common.add_argument("--envelope", type=int, default=Config.ENVELOPE_SEGMENTS, help="loss envelope pieces K")
    common.add_argument("--no-switching", dest="switching", action="store_false",
                        help="fix DC lines to their default statuses")
    common.add_argument("--res-limit", default="cap", choices=RunConfig.RES_LIMITS,
                        help="RES availability model; robust modes accept only cap")
    common.add_argument("--backend", default=Config.SOLVER_BACKEND, choices=Config.BACKENDS)
    common.add_argument("--output", default=Config.OUTPUT_DIR, help="artifact directory")
    common.add_argument("--seed", type=int, default=Config.SEED)

    decomposition = argparse.ArgumentParser(add_help=False)
    decomposition.add_argument("--path", default="centralized", choices=RunConfig.PATHS)
    decomposition.add_argument("--cut", default="multi", choices=RunConfig.CUTS)
    decomposition.add_argument("--async", dest="asynchronous", action="store_true",
                               help="simulate communication delays (defaults to situation 1)")
    decomposition.add_argument("--situation", type=int, default=None, help="delay preset 1, 2 or 3")
    decomposition.add_argument("--n-min", type=int, default=None, help="arrivals needed before the master runs")
    decomposition.add_argument("--staleness", type=int, default=3, help="maximum master iterations without an update")
    decomposition.add_argument("--latency", dest="latencies", type=_ratios, default=None,
                               help="subproblem latency ratios, e.g. 1:2:4")
    decomposition.add_argument("--jitter", type=float, default=0.0, help="relative latency jitter")
    decomposition.add_argument("--residual", dest="residual_tol", type=float, default=Config.GBD_RESIDUAL)
    decomposition.add_argument("--gap", dest="gap_tol", type=float, default=Config.GBD_GAP,
                               help="relative LB/UB gap stop; 0 stops on the residual only")
    decomposition.add_argument("--max-iter", type=int, default=Config.GBD_MAX_ITER)

    solve = sub.add_parser("solve", parents=[common, decomposition], help="solve DOPF/ROPF/E-ROPF")
    solve.add_argument("--node-log", action="store_true", help="write the B&B node log CSV")
    solve.add_argument("--enumerate", action="store_true", help="also solve every DC topology exhaustively")

    sub.add_parser("gbd", parents=[common, decomposition], help="run Benders decomposition")

    evaluate = sub.add_parser("evaluate", parents=[common, decomposition], help="Monte-Carlo robustness")
    evaluate.add_argument("--decisions", default=None, help="decisions JSON; solves first when omitted")
    evaluate.add_argument("--samples", type=int, default=Config.SAMPLES)

    accuracy = sub.add_parser("accuracy", parents=[common], help="linearization accuracy over SLA rounds")
    accuracy.add_argument("--rounds", type=int, default=Config.SLA_ROUNDS)

    sub.add_parser("validate", parents=[common], help="validate a case file")
    sub.add_parser("export", parents=[common], help="write the assembled program as text")
    return parser


def run_config(args: argparse.Namespace) -> RunConfig:
    fields = set(RunConfig.__dataclass_fields__)
    return RunConfig(**{k: v for k, v in vars(args).items() if k in fields})


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, configure logging and dispatch to a command handler"""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        Config.validate()
    except ValueError as e:
        logger.error(f"Configuration error: {e}")
        return 2
    setup_logging(args.log_level)
    return COMMANDS[args.command](run_config(args))


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        sys.exit(130)
