import math

import numpy as np
import pytest

from errors import FormulationError, ModelError
from formulation.assemble import (
    FirstStageDecisions, FormulationOptions, OpfMode, assemble_centralized, boundary_keys, extract_decisions,
    scenarios_for_mode,
)
from formulation.blocks import FIRST_STAGE_KINDS, Scope, add_polygon, build_vsc_block, polygon_normals
from formulation.program import ConicProgram
from grid.loader import case_from_dict
from robust.validity import esm_validity_check
from services.opf_service import OpfService
from solver.backends import solve_continuous
from solver.branch_bound import enumerate_binaries, solve_mixed


def polygon_program(s_max, segments=8):
    program = ConicProgram("polygon")
    p = program.add_variable("p")
    q = program.add_variable("q")
    add_polygon(Scope(program), p, q, s_max, segments, "cap", "test")
    return program


def test_polygon_normals_span_quarter_turn():
    normals = polygon_normals(8)
    assert len(normals) == 9
    assert normals[0] == pytest.approx((1.0, 0.0))
    assert normals[-1] == pytest.approx((0.0, 1.0), abs=1e-12)


def test_polygon_keeps_cap_point_and_cuts_outside():
    program = polygon_program(1.0)
    assert program.max_violation(np.array([1.0, 0.0])) == 0.0
    assert program.max_violation(np.array([-0.7, 0.7])) == 0.0
    assert program.max_violation(np.array([0.98, 0.28])) > 1e-3


def test_res_polygon_rejects_point_past_cap():
    program = polygon_program(0.5)
    assert program.max_violation(np.array([0.5, 0.1])) > 0.0
    assert program.max_violation(np.array([0.3, -0.2])) == 0.0


def test_polygon_rows_are_named_per_normal():
    program = polygon_program(1.0, segments=2)
    names = [row.name for row in program.constraints]
    assert names == ["cap:poly0+", "cap:poly0-", "cap:poly1+", "cap:poly1-", "cap:poly2+", "cap:poly2-"]


def test_power_factor_wedge_slope(fig4_case, base_point, scenario_set):
    program = assemble_centralized(fig4_case, base_point, [scenario_set.nominal], OpfMode.DOPF)
    row = program.constraint("gen_pf_ind[1]")
    pg = program.get("pg[1]").index
    assert -row.terms[pg] == pytest.approx(0.4843, abs=1e-4)
    assert math.tan(math.acos(0.9)) == pytest.approx(0.4843, abs=1e-4)


def test_envelope_gap_at_segment_midpoint(mini_case):
    program = ConicProgram("vsc")
    build_vsc_block(Scope(program), mini_case, 1, envelope=4)
    row = program.constraint("vsc_envelope[1]")
    x = np.zeros(program.n)
    x[program.get("ik[1,1]").index] = 0.375
    x[program.get("bk[1,1]").index] = 1.0
    upper = -row.activity(x)
    assert upper - 0.375 ** 2 == pytest.approx(0.015625)


def test_envelope_needs_a_segment(mini_case):
    with pytest.raises(FormulationError):
        build_vsc_block(Scope(ConicProgram()), mini_case, 1, envelope=0)


def test_dopf_has_single_copy(fig4_case, base_point, scenario_set):
    program = assemble_centralized(fig4_case, base_point, [scenario_set.nominal], OpfMode.DOPF)
    assert not any("@" in name for name in program.names())
    assert len(program.binaries()) == 6 + 4 * FormulationOptions().envelope
    assert program.constraint("res_avail[1]").rhs == pytest.approx(0.5)
    assert program.constraint("res_avail[2]").rhs_param == "pbar[2]"


def test_dopf_rejects_several_scenarios(fig4_case, base_point, scenario_set):
    with pytest.raises(FormulationError):
        assemble_centralized(fig4_case, base_point, scenario_set.extremes, OpfMode.DOPF)
    with pytest.raises(FormulationError):
        assemble_centralized(fig4_case, base_point, [], OpfMode.ROPF)


def test_ropf_shares_only_first_stage(fig4_case, base_point, scenario_set):
    dopf = assemble_centralized(fig4_case, base_point, [scenario_set.nominal], OpfMode.DOPF)
    ropf = assemble_centralized(fig4_case, base_point, scenario_set.extremes, OpfMode.ROPF)
    first = [v for v in dopf.variables if v.name.split("[")[0] in FIRST_STAGE_KINDS]
    assert ropf.n == 4 * (dopf.n - len(first)) + len(first)
    assert "alpha[5]" in ropf and "alpha[5]@e0" not in ropf
    assert "u[4]@e3" in ropf and "u[4]" not in ropf
    assert ropf.constraint("res_avail[2]@e1").rhs == pytest.approx(0.2)
    assert ropf.constraint("res_avail[1]@e2").rhs == pytest.approx(0.3)


def test_eropf_also_shares_boundaries(fig4_case, base_point, scenario_set):
    ropf = assemble_centralized(fig4_case, base_point, scenario_set.extremes, OpfMode.ROPF)
    eropf = assemble_centralized(fig4_case, base_point, scenario_set.extremes, OpfMode.EROPF)
    keys = boundary_keys(fig4_case)
    assert len(keys) == 12
    assert eropf.n == ropf.n - 3 * len(keys)
    assert "pa2v[4]" in eropf and "pa2v[4]@e0" not in eropf
    assert eropf.get("ures[1]").stage == "first"
    assert "pdc[1,1]@e2" in eropf


def test_scenario_objective_weights_average(fig4_case, base_point, scenario_set):
    ropf = assemble_centralized(fig4_case, base_point, scenario_set.extremes, OpfMode.ROPF)
    pr = ropf.get("pr[1]@e0").index
    assert ropf.objective.terms[pr] == pytest.approx(0.25)


def test_without_switching_only_closed_lines(fig4_case, base_point, scenario_set):
    program = assemble_centralized(fig4_case, base_point, [scenario_set.nominal], OpfMode.DOPF,
                                   FormulationOptions(switching=False))
    assert not any(name.startswith("alpha[") for name in program.names())
    assert "pdc[5,1]" not in program
    assert "dc_drop[1]" in {row.name for row in program.constraints}


@pytest.mark.parametrize("mode", list(OpfMode))
def test_assembled_programs_pass_validity(mode, fig4_case, base_point, scenario_set):
    scenarios = scenarios_for_mode(mode, scenario_set.extremes, scenario_set.nominal)
    program = assemble_centralized(fig4_case, base_point, scenarios, mode)
    report = esm_validity_check(program)
    assert report.passed
    assert report.parameter_rows == 2 * len(scenarios)


def test_text_export_records(fig4_case, base_point, scenario_set):
    program = assemble_centralized(fig4_case, base_point, [scenario_set.nominal], OpfMode.DOPF)
    lines = program.to_text().splitlines()
    assert lines[0].startswith("# conic program")
    assert sum(line.startswith("VAR ") for line in lines) == program.n
    assert sum(line.startswith("CON ") for line in lines) == len(program.constraints)
    assert sum(line.startswith(("SOC ", "RSOC ")) for line in lines) == len(program.cones)
    assert any(line.startswith("VAR alpha[1] bin") for line in lines)
    assert any("param=pbar[1]" in line for line in lines)
    assert lines[-1].startswith("OBJ min")


def test_program_rejects_duplicates_and_bad_bounds():
    program = ConicProgram()
    x = program.add_variable("x", 0.0, 1.0)
    with pytest.raises(ModelError):
        program.add_variable("x")
    with pytest.raises(ModelError):
        program.add_variable("y", 2.0, 1.0)
    program.add_constraint(x, "<=", 1.0, name="row")
    with pytest.raises(ModelError):
        program.add_constraint(x, ">=", 0.0, name="row")
    with pytest.raises(ModelError):
        program.add_constraint(x, "<", 1.0)


def test_constants_move_to_rhs():
    program = ConicProgram()
    x = program.add_variable("x")
    row = program.add_constraint(2 * x + 3.0, "<=", 7.0)
    assert row.terms == {0: 2.0}
    assert row.rhs == pytest.approx(4.0)


def test_decisions_extract_and_serialize(fig4_case, base_point, scenario_set):
    program = assemble_centralized(fig4_case, base_point, scenario_set.extremes, OpfMode.EROPF)
    x = np.zeros(program.n)
    x[program.get("alpha[5]").index] = 1.0
    x[program.get("pg[1]").index] = 0.8
    decisions = extract_decisions(program, x, OpfMode.EROPF)
    assert decisions.alpha == {1: 0, 2: 0, 3: 0, 4: 0, 5: 1, 6: 0}
    assert decisions.pg[1] == pytest.approx(0.8)
    assert set(decisions.boundary) == {n for names in program.boundary.values() for n in names}
    assert FirstStageDecisions.from_dict(decisions.to_dict()) == decisions
    assert decisions.fixed_bounds()["alpha[5]"] == (1.0, 1.0)


def test_ropf_decisions_carry_no_boundaries(fig4_case, base_point, scenario_set):
    program = assemble_centralized(fig4_case, base_point, scenario_set.extremes, OpfMode.ROPF)
    decisions = extract_decisions(program, np.zeros(program.n), OpfMode.ROPF)
    assert decisions.boundary == {}
    assert set(decisions.pg) == {1, 2}


@pytest.fixture
def triangle_case(mini_doc):
    """mini case with a third, station-free DC node closing a switchable ring"""
    mini_doc["name"] = "triangle"
    mini_doc["dc_nodes"] = [{"id": 1}, {"id": 2}, {"id": 3}]
    mini_doc["dc_lines"] = [
        {"id": 1, "from": 1, "to": 2, "r": 0.05, "switchable": True},
        {"id": 2, "from": 2, "to": 3, "r": 0.05, "switchable": True},
        {"id": 3, "from": 3, "to": 1, "r": 0.05, "switchable": True},
    ]
    return case_from_dict(mini_doc, name="triangle")


@pytest.mark.slow
def test_big_m_switching_matches_brute_force(triangle_case):
    program = OpfService().assemble(triangle_case, OpfMode.DOPF)
    names = [f"alpha[{line.id}]" for line in triangle_case.dc_lines]
    enumerated = enumerate_binaries(program, names)
    assert len(enumerated.outcomes) == 8
    searched = solve_mixed(program, gap=0.0)
    assert searched.objective == pytest.approx(enumerated.best.objective, rel=1e-5, abs=1e-6)

    solved = 0
    for assignment, status, _ in enumerated.outcomes:
        if status != "optimal":
            continue
        fixed = program.with_bounds({name: (value, value) for name, value in assignment.items()})
        solution = solve_continuous(fixed)
        assert solution.optimal
        solved += 1

        def value(name):
            return solution.value(fixed, name)

        for line in triangle_case.dc_lines:
            i, j = line.from_node, line.to_node
            pf, pt = value(f"pdc[{line.id},{i}]"), value(f"pdc[{line.id},{j}]")
            if assignment[f"alpha[{line.id}]"] == 0:
                assert (pf, pt) == pytest.approx((0.0, 0.0), abs=1e-6)
                assert value(f"ldc[{line.id}]") == pytest.approx(0.0, abs=1e-6)
                # the auxiliaries absorb the terminal voltages, so the drop row binds nothing
                assert value(f"bdc[{line.id}]") == pytest.approx(value(f"udc[{i}]"), abs=1e-6)
                assert value(f"tdc[{line.id}]") == pytest.approx(value(f"udc[{j}]"), abs=1e-6)
            else:
                assert value(f"bdc[{line.id}]") == pytest.approx(0.0, abs=1e-6)
                assert value(f"tdc[{line.id}]") == pytest.approx(0.0, abs=1e-6)
                drop = value(f"udc[{i}]") - value(f"udc[{j}]")
                assert drop == pytest.approx(line.r * (pf - pt), abs=1e-6)
    assert solved >= 1


def test_open_line_leaves_terminal_voltages_free(triangle_case):
    program = OpfService().assemble(triangle_case, OpfMode.DOPF)
    top = triangle_case.dc_nodes[0].u_max
    spread = {"udc[1]": (top, top), "udc[2]": (1.0, 1.0)}
    all_open = {f"alpha[{line.id}]": (0.0, 0.0) for line in triangle_case.dc_lines}
    solution = solve_continuous(program.with_bounds({**all_open, **spread}))
    assert solution.optimal

    # the same voltages across a closed line carrying no flow are contradictory
    closed = {**all_open, "alpha[1]": (1.0, 1.0), "pdc[1,1]": (0.0, 0.0), "pdc[1,2]": (0.0, 0.0)}
    assert not solve_continuous(program.with_bounds({**closed, **spread})).optimal
