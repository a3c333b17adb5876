"""
Case validation and program export commands
"""
from loguru import logger

from config import RunConfig
from errors import ConfigError, OpfError
from grid.loader import load_case
from grid.validation import validate_case
from handlers.solve import formulation_options
from robust.validity import esm_validity_check
from services.opf_service import OpfService
from utils.helpers import write_json, write_text
from utils.messages import Messages


def cmd_validate(config: RunConfig) -> int:
    """Handle `validate`: structural report without raising on violations"""
    try:
        config.validate()
        case = load_case(config.case, validate=False)
        report = validate_case(case)
        write_json(config.output_dir / "validation.json", dict(report.to_dict(), case=case.name))
        print(Messages.format_validation(case.name, report))
        return 0 if report.valid else 1

    except ConfigError as e:
        logger.error(Messages.USAGE_ERROR.format(error=e))
        return 2
    except OpfError as e:
        logger.error(Messages.RUN_ERROR.format(error=e))
        return 1


def cmd_export(config: RunConfig) -> int:
    """Handle `export`: assembled program in the text interchange format"""
    try:
        config.validate()
        service = OpfService(config.backend)
        case = service.load(config.case)
        program = service.assemble(case, config.mode, formulation_options(config))
        validity = esm_validity_check(program)
        path = write_text(config.output_dir / f"{case.name}-{config.mode}.program", program.to_text())
        write_json(config.output_dir / f"{case.name}-{config.mode}-validity.json", validity.to_dict())
        print(Messages.EXPORTED.format(mode=config.mode.upper(), path=path, **program.summary()))
        return 0 if validity.passed else 1

    except ConfigError as e:
        logger.error(Messages.USAGE_ERROR.format(error=e))
        return 2
    except OpfError as e:
        logger.error(Messages.RUN_ERROR.format(error=e))
        return 1
