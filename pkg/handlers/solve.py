"""
Centralized solve command
"""
from loguru import logger

from config import RunConfig
from errors import ConfigError, OpfError
from formulation.assemble import FormulationOptions
from services.opf_service import OpfService
from utils.helpers import NodeLogRecorder, write_csv, write_json
from utils.messages import Messages


def formulation_options(config: RunConfig) -> FormulationOptions:
    return FormulationOptions(segments=config.segments, envelope=config.envelope, switching=config.switching,
                              res_limit=config.res_limit)


def cmd_solve(config: RunConfig) -> int:
    """Handle `solve`: centralized B&B, or GBD when --path gbd"""
    try:
        config.validate()
        if config.path == "gbd":
            from handlers.gbd import cmd_gbd
            return cmd_gbd(config)

        service = OpfService(config.backend)
        case = service.load(config.case)
        op_point, scenarios = service.prepare(case)
        options = formulation_options(config)
        out = config.output_dir

        recorder = NodeLogRecorder(out / "bb_nodes.csv") if config.node_log else None
        run = service.solve_centralized(case, config.mode, options, op_point, scenarios, node_log=recorder)
        if recorder is not None:
            recorder.flush()
        write_json(out / "solution.json", run.to_dict())

        if not run.solved:
            print(Messages.SOLVE_NO_SOLUTION.format(mode=config.mode.upper(), case=case.name,
                                                    status=run.solution.status.value))
            return 1

        write_json(out / "decisions.json", run.decisions.to_dict())
        write_json(out / "cone_residuals.json", run.residuals.to_dict())
        write_csv(out / "topology.csv", run.topology)
        print(Messages.format_solve(config.mode, case.name, run.solution.status.value,
                                    run.solution.objective, run.solution.nodes))
        print(Messages.format_topology(run.topology))
        print(Messages.format_cones(run.residuals))

        if config.enumerate:
            result = service.enumerate_topologies(case, config.mode, options, op_point, scenarios)
            rows = [dict(assignment, status=status, objective=objective)
                    for assignment, status, objective in result.outcomes]
            write_csv(out / "topologies.csv", rows)
            print(f"Exhaustive topology optimum: {Messages.number(result.best.objective)}")
        return 0

    except ConfigError as e:
        logger.error(Messages.USAGE_ERROR.format(error=e))
        return 2
    except OpfError as e:
        logger.error(Messages.RUN_ERROR.format(error=e))
        return 1
