import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import ConfigError, FormulationError, ModelError
from formulation.assemble import FirstStageDecisions, FormulationOptions, OpfMode
from formulation.blocks import Scope, build_res_block
from formulation.program import ConicProgram
from gbd.decompose import decompose
from robust.evaluation import RobustnessReport, ScenarioOutcome, evaluate_robustness
from robust.scenarios import Scenario, enumerate_extremes, sample_scenarios
from robust.validity import esm_validity_check
from services.opf_service import OpfService
from solver.models import StandardForm


def test_bundled_extremes(scenario_set):
    values = {s.values() for s in scenario_set.extremes}
    assert values == {(0.5, 0.5), (0.5, 0.2), (0.3, 0.5), (0.3, 0.2)}
    assert [s.name for s in scenario_set.extremes] == ["e0", "e1", "e2", "e3"]
    assert scenario_set.nominal.as_dict() == {1: 0.5, 2: 0.5}


def test_local_extremes_per_res(scenario_set):
    assert [s.value(1) for s in scenario_set.local["res#1"]] == [0.5, 0.3]
    assert [s.value(2) for s in scenario_set.local["res#2"]] == [0.5, 0.2]


def test_degenerate_box_is_deduplicated():
    extremes, local = enumerate_extremes({1: (0.4, 0.4), 2: (0.1, 0.3)})
    assert [s.values() for s in extremes] == [(0.4, 0.3), (0.4, 0.1)]
    assert len(local["res#1"]) == 1


def test_three_boxes_give_eight_vertices():
    extremes, _ = enumerate_extremes({1: (0.0, 1.0), 2: (0.0, 1.0), 3: (0.5, 0.6)})
    assert len(extremes) == 8
    assert len({s.values() for s in extremes}) == 8


def test_inverted_box_rejected():
    with pytest.raises(ConfigError):
        enumerate_extremes({1: (0.6, 0.2)})


@settings(max_examples=30)
@given(st.integers(1, 50), st.integers(0, 2 ** 31 - 1))
def test_samples_stay_in_their_boxes(count, seed):
    boxes = {1: (0.3, 0.5), 2: (0.2, 0.5)}
    samples = sample_scenarios(boxes, count, seed)
    assert len(samples) == count
    for scenario in samples:
        for res_id, (low, high) in boxes.items():
            assert low <= scenario.value(res_id) <= high


def test_samples_repeat_for_a_seed():
    boxes = {1: (0.3, 0.5), 2: (0.2, 0.5)}
    assert sample_scenarios(boxes, 5, 42) == sample_scenarios(boxes, 5, 42)
    assert sample_scenarios(boxes, 5, 42) != sample_scenarios(boxes, 5, 43)


def test_sample_mean_near_box_centre():
    samples = sample_scenarios({1: (0.3, 0.5)}, 4000, 3)
    mean = np.mean([s.value(1) for s in samples])
    assert mean == pytest.approx(0.4, abs=0.005)


def test_zero_samples_rejected():
    with pytest.raises(ConfigError):
        sample_scenarios({1: (0.3, 0.5)}, 0, 1)


def test_scenario_lookup():
    scenario = Scenario.of("s", {2: 0.25, 1: 0.4})
    assert scenario.available == ((1, 0.4), (2, 0.25))
    with pytest.raises(KeyError):
        scenario.value(3)


def synthetic_program():
    program = ConicProgram("synthetic")
    x = program.add_variable("x", 0.0, 1.0)
    y = program.add_variable("y", 0.0, 1.0)
    program.add_constraint(x, "<=", 0.5, name="avail", rhs_param="pbar[1]")
    return program, x, y


def test_validity_accepts_rhs_parameters():
    program, x, y = synthetic_program()
    program.add_constraint(x + y, "<=", 1.0, name="plain")
    report = esm_validity_check(program)
    assert report.passed
    assert report.parameter_rows == 1


def test_validity_rejects_parameter_coefficients():
    program, x, y = synthetic_program()
    program.add_constraint(x - 0.4 * y, "==", 0.0, name="share", coeff_params={y: "pbar[1]"})
    report = esm_validity_check(program)
    assert not report.passed
    assert report.issues == ["row 'share': uncertain parameter(s) pbar[1] multiply variables"]
    with pytest.raises(FormulationError):
        esm_validity_check(program, strict=True)


def test_validity_rejects_variable_products():
    program, x, y = synthetic_program()
    program.add_constraint(x, "<=", 1.0, name="plain", products=[(x, y, 1.0)])
    report = esm_validity_check(program)
    assert report.issues == ["row 'plain': 1 variable product term(s)"]


def test_validity_rejects_parameter_cones():
    program, x, y = synthetic_program()
    program.add_soc(0.5, [x, y], name="rating", tag="capability", params=["pbar[1]"])
    report = esm_validity_check(program)
    assert report.issues == ["cone 'rating': depends on uncertain parameter(s) pbar[1]"]


def test_products_are_refused_by_conic_backends():
    program, x, y = synthetic_program()
    program.add_constraint(x, "<=", 1.0, name="plain", products=[(x, y, 1.0)])
    program.add_objective(x)
    with pytest.raises(ModelError, match="bilinear"):
        StandardForm.from_program(program)


def test_program_text_records_parameters():
    program, x, y = synthetic_program()
    program.add_constraint(x - 0.4 * y, "==", 0.0, name="share", coeff_params={y: "pbar[1]"})
    program.add_soc(0.5, [x, y], name="rating", tag="capability", params=["pbar[1]"])
    text = program.to_text()
    assert "coeff[y]=pbar[1]" in text
    assert "params=pbar[1]" in text


def test_assembled_eropf_passes_validity(fig4_case, base_point, scenario_set):
    program = OpfService().assemble(fig4_case, OpfMode.EROPF, op_point=base_point, scenarios=scenario_set)
    report = esm_validity_check(program, strict=True)
    assert report.passed
    availability = [row for row in program.constraints if row.name.startswith("res_avail[")]
    assert availability and all(row.rhs_param for row in availability)
    assert report.parameter_rows == len(availability)
    assert report.cones == len(program.cones) > 0


@pytest.mark.parametrize("limit, fragment", [
    ("ratio", "multiply variables"),
    ("rated", "depends on uncertain parameter(s)"),
])
def test_res_builder_tags_parametric_limits(fig4_case, limit, fragment):
    program = ConicProgram("res")
    build_res_block(Scope(program, "e0"), fig4_case, 1, 0.4, limit=limit)
    report = esm_validity_check(program)
    assert len(report.issues) == 1
    assert fragment in report.issues[0]


@pytest.mark.parametrize("limit", ["ratio", "rated"])
def test_robust_assembly_refuses_parametric_res_limit(fig4_case, base_point, scenario_set, limit):
    options = FormulationOptions(res_limit=limit)
    with pytest.raises(FormulationError, match="scenario validity"):
        OpfService().assemble(fig4_case, OpfMode.EROPF, options, base_point, scenario_set)
    with pytest.raises(FormulationError, match="scenario validity"):
        decompose(fig4_case, base_point, OpfMode.EROPF, scenario_set, options)


@pytest.mark.parametrize("limit", ["ratio", "rated"])
def test_deterministic_assembly_accepts_parametric_res_limit(fig4_case, base_point, scenario_set, limit):
    options = FormulationOptions(res_limit=limit)
    program = OpfService().assemble(fig4_case, OpfMode.DOPF, options, base_point, scenario_set)
    assert esm_validity_check(program).passed


def test_unknown_res_limit(fig4_case, base_point, scenario_set):
    with pytest.raises(FormulationError, match="unknown RES limit"):
        OpfService().assemble(fig4_case, OpfMode.EROPF, FormulationOptions(res_limit="soft"), base_point,
                              scenario_set)


def test_report_statistics():
    outcomes = [
        ScenarioOutcome(0, "s0", {1: 0.4}, True, 2.0, "optimal"),
        ScenarioOutcome(1, "s1", {1: 0.3}, False, None, "infeasible"),
        ScenarioOutcome(2, "s2", {1: 0.5}, True, 4.0, "optimal"),
    ]
    report = RobustnessReport("dopf", outcomes)
    assert report.feasible_count == 2
    assert report.feasible_ratio == pytest.approx(2 / 3)
    assert (report.objective_min, report.objective_max, report.objective_mean) == (2.0, 4.0, 3.0)
    assert report.to_dict()["scenarios"][1]["objective"] == ""


def test_empty_report():
    report = RobustnessReport("eropf")
    assert report.feasible_ratio == 0.0
    assert report.objective_mean is None


def test_evaluation_needs_samples(fig4_case):
    decisions = FirstStageDecisions(mode="dopf", switching=True)
    with pytest.raises(ConfigError):
        OpfService().evaluate(fig4_case, decisions, 0)


def test_evaluation_rejects_empty_sample_list(fig4_case, base_point):
    decisions = FirstStageDecisions(mode="eropf", switching=True)
    with pytest.raises(ConfigError):
        evaluate_robustness(fig4_case, base_point, decisions, [])
