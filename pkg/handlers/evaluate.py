"""
Robustness evaluation command
"""
from pathlib import Path

from loguru import logger

from config import RunConfig
from errors import ConfigError, OpfError
from formulation.assemble import FirstStageDecisions
from gbd.models import CutMode
from handlers.gbd import delay_settings
from handlers.solve import formulation_options
from services.opf_service import OpfService
from utils.helpers import read_json, write_csv, write_json
from utils.messages import Messages


def load_decisions(path: str) -> FirstStageDecisions:
    """Decisions from a decisions.json or from a solution.json that embeds them"""
    try:
        data = read_json(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read decisions from {path}: {e}") from e
    if isinstance(data, dict) and "decisions" in data:
        data = data["decisions"]
    if not isinstance(data, dict) or "mode" not in data:
        raise ConfigError(f"{path} holds no first-stage decisions")
    return FirstStageDecisions.from_dict(data)


def cmd_evaluate(config: RunConfig) -> int:
    """Handle `evaluate`: fix first-stage decisions and tally sampled-scenario feasibility"""
    try:
        config.validate()
        service = OpfService(config.backend)
        case = service.load(config.case)
        op_point, scenarios = service.prepare(case)
        options = formulation_options(config)
        out = config.output_dir

        if config.decisions:
            decisions = load_decisions(config.decisions)
        elif config.path == "gbd":
            result = service.gbd(case, config.mode, CutMode(config.cut), delay_settings(config), options,
                                 op_point, scenarios, residual_tol=config.residual_tol,
                                 gap_tol=config.gap_tol, max_iter=config.max_iter)
            decisions = result.decisions
        else:
            decisions = service.solve_centralized(case, config.mode, options, op_point, scenarios).decisions
        if decisions is None:
            logger.error(f"No {config.mode.upper()} decisions to evaluate on '{case.name}'")
            return 1

        report = service.evaluate(case, decisions, config.samples, config.seed, options, op_point)
        write_json(out / f"robustness-{decisions.mode}.json", report.to_dict())
        write_csv(out / f"robustness-{decisions.mode}.csv", [o.to_row() for o in report.outcomes])
        print(Messages.format_evaluation(report.summary()))
        return 0

    except ConfigError as e:
        logger.error(Messages.USAGE_ERROR.format(error=e))
        return 2
    except OpfError as e:
        logger.error(Messages.RUN_ERROR.format(error=e))
        return 1
