"""
Linearization accuracy command
"""
from loguru import logger

from config import RunConfig
from errors import ConfigError, OpfError
from handlers.solve import formulation_options
from services.opf_service import OpfService
from utils.helpers import write_csv, write_json
from utils.messages import Messages


def cmd_accuracy(config: RunConfig) -> int:
    """Handle `accuracy`: per-node linear vs nonlinear voltages over SLA rounds"""
    try:
        config.validate()
        service = OpfService(config.backend)
        case = service.load(config.case)
        study = service.accuracy(case, config.rounds, formulation_options(config))
        out = config.output_dir
        write_csv(out / "accuracy.csv", study.rows, ["round", "node", "u_lin", "u_nonlin", "abs_error"])
        write_json(out / "accuracy.json", dict(study.to_dict(), rounds=config.rounds,
                                               non_increasing=study.non_increasing()))
        print(Messages.format_accuracy(study.errors, study.failures))
        return 0

    except ConfigError as e:
        logger.error(Messages.USAGE_ERROR.format(error=e))
        return 2
    except OpfError as e:
        logger.error(Messages.RUN_ERROR.format(error=e))
        return 1
