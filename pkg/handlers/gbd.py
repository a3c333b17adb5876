"""
Generalized Benders decomposition command
"""
from loguru import logger

from config import RunConfig
from errors import ConfigError, OpfError
from gbd.models import CutMode
from handlers.solve import formulation_options
from services.opf_service import DelaySettings, OpfService
from utils.helpers import write_csv, write_json
from utils.messages import Messages


def delay_settings(config: RunConfig) -> DelaySettings:
    if not config.delayed:
        return DelaySettings()
    situation = config.situation
    if situation is None and config.latencies is None and config.n_min is None:
        situation = 1
    return DelaySettings(situation=situation, latencies=config.latencies, n_min=config.n_min,
                         staleness=config.staleness, jitter=config.jitter, seed=config.seed)


def cmd_gbd(config: RunConfig) -> int:
    """Handle `gbd`: run the decomposition and write its trace"""
    try:
        config.path = "gbd"
        config.validate()
        service = OpfService(config.backend)
        case = service.load(config.case)
        op_point, scenarios = service.prepare(case)
        options = formulation_options(config)
        cut_mode = CutMode(config.cut)
        delay = delay_settings(config)
        thresholds = dict(residual_tol=config.residual_tol, gap_tol=config.gap_tol, max_iter=config.max_iter)
        out = config.output_dir

        decomposition = service.decompose(case, config.mode, options, op_point, scenarios)
        result = service.run_decomposition(decomposition, cut_mode, delay, **thresholds)

        summary = result.summary()
        summary.update(cut=cut_mode.value, asynchronous=delay.asynchronous,
                       lb_monotone=result.trace.lb_monotone(), subproblems=decomposition.sp_ids)
        print(Messages.format_gbd(result, cut_mode.value, delay.asynchronous))

        if delay.asynchronous:
            reference_decomposition = service.decompose(case, config.mode, options, op_point, scenarios)
            reference = service.run_decomposition(reference_decomposition, cut_mode, None, **thresholds)
            summary["sync_objective"] = reference.objective
            summary["sync_iterations"] = reference.iterations
            if result.objective is not None and reference.objective is not None:
                summary["deviation"] = result.objective - reference.objective
            print(Messages.format_deviation(result.objective, reference.objective))

        write_csv(out / "gbd_trace.csv", result.trace.rows())
        write_json(out / "gbd_summary.json", summary)
        write_json(out / "gbd_cuts.json", [cut.to_dict() for cut in result.cuts])
        if result.decisions is not None:
            write_json(out / "decisions.json", result.decisions.to_dict())

        if not result.converged:
            logger.warning(Messages.GBD_NOT_CONVERGED.format(iterations=result.iterations))
            return 1
        return 0

    except ConfigError as e:
        logger.error(Messages.USAGE_ERROR.format(error=e))
        return 2
    except OpfError as e:
        logger.error(Messages.RUN_ERROR.format(error=e))
        return 1
