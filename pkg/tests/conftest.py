import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from config import Config  # noqa: E402
from formulation.program import ConicProgram  # noqa: E402
from grid.loader import bundled_case_path, case_from_dict, load_case  # noqa: E402
from powerflow.linearization import solve_base_power_flow  # noqa: E402
from robust.scenarios import build_scenario_set  # noqa: E402


@pytest.fixture(scope="session")
def fig4_case():
    return load_case(bundled_case_path("fig4"))


@pytest.fixture(scope="session")
def tight_case():
    return load_case(bundled_case_path("fig4-tight"))


@pytest.fixture(scope="session")
def base_point(fig4_case):
    return solve_base_power_flow(fig4_case)


@pytest.fixture(scope="session")
def scenario_set(fig4_case):
    return build_scenario_set(fig4_case)


def minimal_doc() -> dict:
    """Two AC buses, one RES-free VSC pair on a two-terminal DC link"""
    return {
        "format_version": 1,
        "name": "mini",
        "ac_nodes": [{"id": 1, "slack": True}, {"id": 2, "load_p": 0.1}],
        "ac_branches": [{"id": 1, "from": 1, "to": 2, "r": 0.01, "x": 0.1}],
        "generators": [{"id": 1, "node": 1, "p_max": 1.0}],
        "dc_nodes": [{"id": 1}, {"id": 2}],
        "dc_lines": [{"id": 1, "from": 1, "to": 2, "r": 0.05}],
        "vsc_stations": [
            {"id": 1, "ac_node": 1, "dc_node": 1},
            {"id": 2, "ac_node": 2, "dc_node": 2},
        ],
    }


@pytest.fixture
def mini_doc():
    return minimal_doc()


@pytest.fixture
def mini_case():
    return case_from_dict(minimal_doc(), name="mini")


@pytest.fixture
def two_bus_resistive():
    """Slack bus 1 at v = 1 feeding 0.1 p.u. through a pure conductance g = 10"""
    return case_from_dict({
        "name": "two-bus",
        "ac_nodes": [{"id": 1, "slack": True}, {"id": 2, "load_p": 0.1}],
        "ac_branches": [{"id": 1, "from": 1, "to": 2, "g": 10.0, "b": 0.0}],
    })


@pytest.fixture
def cone_program():
    """min t  s.t.  ||(p, q)|| <= t,  p = 3,  q = 4"""
    program = ConicProgram("cone")
    t = program.add_variable("t", 0.0, 100.0)
    p = program.add_variable("p")
    q = program.add_variable("q")
    program.add_constraint(p, "==", 3.0, name="fix_p")
    program.add_constraint(q, "==", 4.0, name="fix_q")
    program.add_soc(t, [p, q], name="norm")
    program.add_objective(t)
    return program


@pytest.fixture
def artifacts(tmp_path, monkeypatch):
    """Redirect the log file and output directory into a temporary folder"""
    monkeypatch.setattr(Config, "LOG_FILE", str(tmp_path / "logs" / "opf.log"))
    monkeypatch.setattr(Config, "OUTPUT_DIR", str(tmp_path / "results"))
    return tmp_path
