import asyncio

import numpy as np
import pytest

from errors import ConfigError, DecompositionError
from formulation.assemble import OpfMode
from gbd.decompose import BOUNDARY_LABELS, decompose, z_lower_bound
from gbd.engine import GbdEngine
from gbd.master import MasterProblem
from gbd.models import BendersCut, CutKind, CutMode, StopRule
from gbd.schedule import Arrival, DelayModel, EventQueue, ready
from gbd.subproblems import SubproblemWorker
from powerflow.linearization import solve_base_power_flow
from robust.scenarios import build_scenario_set
from services.opf_service import DelaySettings, OpfService


@pytest.fixture(scope="module")
def decomposition(fig4_case, base_point, scenario_set):
    return decompose(fig4_case, base_point, OpfMode.EROPF, scenario_set)


def run(decomposition, cut_mode=CutMode.MULTI, delay=None, **thresholds):
    return asyncio.run(GbdEngine(decomposition, cut_mode, delay, **thresholds).run())


def test_one_subproblem_per_ac_side_system(decomposition, fig4_case):
    assert decomposition.sp_ids == ["ac", "res#1", "res#2"]
    assert len(decomposition.coupling) == 3 * len(fig4_case.vscs)
    ac = decomposition.subproblem("ac")
    assert ac.vsc_ids == [3, 4]
    assert ac.replicas == ["ps[3]", "qs[3]", "css[3]", "ps[4]", "qs[4]", "css[4]"]
    assert decomposition.subproblem("res#2").boundary == ["pr2v[2]", "qr2v[2]", "ures[2]"]


def test_master_holds_topology_and_stations(decomposition):
    names = decomposition.master.names()
    assert {f"alpha[{k}]" for k in range(1, 7)} <= set(names)
    assert not any(name.startswith(("pg[", "u[", "pr[")) for name in names)


def test_subproblems_are_pinned_at_base_point(decomposition, base_point):
    ac = decomposition.subproblem("ac")
    assert ac.program.constraint("pin[u[4]]").rhs == pytest.approx(base_point.u_of(4))
    res = decomposition.subproblem("res#1")
    assert res.initial == {"pr2v[1]": 0.0, "qr2v[1]": 0.0, "ures[1]": 1.0}


def test_res_subproblem_averages_local_scenarios(decomposition):
    program = decomposition.subproblem("res#1").program
    assert program.constraint("res_avail[1]@res#1:e0").rhs == pytest.approx(0.5)
    assert program.constraint("res_avail[1]@res#1:e1").rhs == pytest.approx(0.3)
    assert program.objective.terms[program.get("pr[1]@res#1:e0").index] == pytest.approx(0.5)


def test_ropf_cannot_be_decomposed(fig4_case, base_point, scenario_set):
    with pytest.raises(DecompositionError):
        decompose(fig4_case, base_point, OpfMode.ROPF, scenario_set)


def test_single_ac_system_gives_one_subproblem(mini_case):
    split = decompose(mini_case, solve_base_power_flow(mini_case), OpfMode.DOPF, build_scenario_set(mini_case))
    assert split.sp_ids == ["ac"]
    assert len(split.coupling) == 6


def test_z_floor_formula(fig4_case):
    expected = -10.0 * abs(0.2 + 0.15) - 10.0 - 1.9
    assert z_lower_bound(fig4_case) == pytest.approx(expected)


def test_cut_equals_intercept_at_its_point():
    cut = BendersCut(CutKind.OPTIMALITY, "ac", 1, {"a": 2.0, "b": -1.0}, {"a": 0.5, "b": 1.5}, 7.0)
    assert cut.value({"a": 0.5, "b": 1.5}) == pytest.approx(7.0)
    assert cut.value({"a": 1.5, "b": 1.5}) == pytest.approx(9.0)
    assert cut.constant() == pytest.approx(7.0 - 1.0 + 1.5)


def test_aggregate_sums_subproblem_cuts():
    first = BendersCut(CutKind.OPTIMALITY, "ac", 2, {"a": 1.0}, {"a": 0.0}, 1.0)
    second = BendersCut(CutKind.OPTIMALITY, "res#1", 2, {"a": 0.5, "b": 1.0}, {"a": 0.0, "b": 2.0}, 3.0)
    merged = BendersCut.aggregate([first, second], 2)
    assert merged.sp_id == "all"
    assert merged.gradient == {"a": 1.5, "b": 1.0}
    assert merged.intercept == pytest.approx(4.0)


def test_osp_value_and_gradient(decomposition):
    spec = decomposition.subproblem("res#1")
    point = {"ps[1]": 0.25, "qs[1]": 0.0, "css[1]": 1.0}
    answer = SubproblemWorker(spec).solve_osp(point, 1)
    assert answer.feasible
    assert answer.value == pytest.approx(0.25, abs=1e-6)
    assert answer.cut.gradient["ps[1]"] == pytest.approx(1.0, abs=1e-5)
    assert answer.cut.value(point) == pytest.approx(answer.value)


def test_infeasible_pin_yields_feasibility_cut(decomposition):
    spec = decomposition.subproblem("res#1")
    point = {"ps[1]": 2.0, "qs[1]": 0.0, "css[1]": 1.0}
    worker = SubproblemWorker(spec)
    assert worker.solve_osp(point, 1) is None
    answer = worker.answer(point, 1)
    assert not answer.feasible
    assert answer.label == "rsp"
    assert answer.cut.kind is CutKind.FEASIBILITY
    assert answer.value == pytest.approx(1.7, abs=1e-5)
    assert answer.cut.value(point) == pytest.approx(1.7, abs=1e-5)


CUT_TOL = 1e-4
SPREAD = {"p": 0.6, "q": 0.6, "u": 0.08}


@pytest.fixture(scope="module")
def eropf_boundary(fig4_case, base_point, scenario_set):
    run = OpfService().solve_centralized(fig4_case, OpfMode.EROPF, op_point=base_point, scenarios=scenario_set)
    assert run.solved
    return run.decisions.boundary


def boundary_samples(spec, optimum, count, seed):
    """Random replica points around the centralized optimum, plus that optimum and a far anchor"""
    rng = np.random.default_rng(seed)
    labels = [BOUNDARY_LABELS[k % len(BOUNDARY_LABELS)] for k in range(len(spec.boundary))]
    centre = {replica: optimum.get(name, spec.initial[name]) for name, replica in zip(spec.boundary, spec.replicas)}
    points = [dict(centre)]
    for _ in range(count):
        points.append({replica: centre[replica] + rng.uniform(-SPREAD[label], SPREAD[label])
                       for replica, label in zip(spec.replicas, labels)})
    far = dict(centre)
    far[spec.replicas[0]] += 5.0
    points.append(far)
    return points


@pytest.mark.slow
@pytest.mark.parametrize("sp_id", ["ac", "res#1", "res#2"])
def test_cuts_never_overestimate_the_subproblem(decomposition, eropf_boundary, sp_id):
    spec = decomposition.subproblem(sp_id)
    worker = SubproblemWorker(spec)
    samples = boundary_samples(spec, eropf_boundary, 20, 40 + spec.order)
    answers = [worker.answer(point, it) for it, point in enumerate(samples)]
    feasible = [a for a in answers if a.feasible]
    infeasible = [a for a in answers if not a.feasible]
    assert feasible and infeasible

    for a in feasible:
        assert a.cut.kind is CutKind.OPTIMALITY
        for b in feasible:
            assert a.cut.value(b.point) <= b.value + CUT_TOL * (1.0 + abs(b.value))

    for a in infeasible:
        if a.cut is None:
            assert a.value <= 1e-6
            continue
        assert a.cut.kind is CutKind.FEASIBILITY
        assert a.value > 0
        # the cut removes the point it was generated at
        assert a.cut.value(a.point) == pytest.approx(a.value, abs=CUT_TOL)
        for b in feasible:
            assert a.cut.value(b.point) <= CUT_TOL
        for b in infeasible:
            assert a.cut.value(b.point) <= b.value + CUT_TOL * (1.0 + b.value)


def test_empty_pool_bound_is_sum_of_floors(decomposition):
    master = MasterProblem(decomposition)
    assert master.solve().lb == pytest.approx(3 * decomposition.z_min, abs=1e-6)


def test_constant_cuts_raise_the_bound(decomposition):
    master = MasterProblem(decomposition)
    for sp in decomposition.sp_ids:
        assert master.add_cut(BendersCut(CutKind.OPTIMALITY, sp, 0, {}, {}, 5.0))
    assert not master.add_cut(BendersCut(CutKind.OPTIMALITY, "ac", 3, {}, {}, 5.0))
    assert master.solve().lb == pytest.approx(15.0, abs=1e-6)


def test_single_cut_master_has_one_epigraph(decomposition):
    master = MasterProblem(decomposition, CutMode.SINGLE)
    assert master.z_ids == ["all"]
    assert master.z_floor == pytest.approx(decomposition.z_min)


def test_situation_presets():
    ids = ["ac", "res#1", "res#2"]
    assert DelayModel.situation(1, ids).latencies == {"ac": 1.0, "res#1": 1.0, "res#2": 1.0}
    assert DelayModel.situation(1, ids).synchronous
    s2 = DelayModel.situation(2, ids)
    assert (s2.latencies["res#2"], s2.n_min) == (2.0, 2)
    s3 = DelayModel.situation(3, ids)
    assert s3.latencies == {"ac": 1.0, "res#1": 2.0, "res#2": 4.0}
    assert s3.n_min == 2 and s3.staleness == 3


@pytest.mark.parametrize("build", [
    lambda ids: DelayModel.situation(4, ids),
    lambda ids: DelayModel.situation(1, ids[:2]),
    lambda ids: DelayModel({"ac": 1.0}, 2),
    lambda ids: DelayModel({"ac": -1.0}, 1),
    lambda ids: DelayModel.from_ratios([1.0, 2.0], ids, 1),
])
def test_invalid_delay_models(build):
    with pytest.raises(ConfigError):
        build(["ac", "res#1", "res#2"])


def test_jitter_is_seeded():
    ids = ["ac", "res#1", "res#2"]
    first = DelayModel.situation(3, ids, jitter=0.2, seed=7)
    second = DelayModel.situation(3, ids, jitter=0.2, seed=7)
    assert [first.duration("res#2") for _ in range(5)] == [second.duration("res#2") for _ in range(5)]


def test_event_queue_orders_by_time_then_subproblem():
    queue = EventQueue()
    queue.push(Arrival(2.0, 0, "ac", 0))
    queue.push(Arrival(1.0, 2, "res#2", 0))
    queue.push(Arrival(1.0, 1, "res#1", 0))
    assert [queue.pop().sp_id for _ in range(3)] == ["res#1", "res#2", "ac"]


def test_ready_needs_arrivals_and_bounded_staleness():
    model = DelayModel.situation(3, ["ac", "res#1", "res#2"])
    last = {"ac": 4, "res#1": 4, "res#2": 1}
    assert not ready(["ac"], last, 4, model)
    assert ready(["ac", "res#1"], last, 3, model)
    assert not ready(["ac", "res#1"], last, 4, model)


def test_single_cut_must_be_synchronous(decomposition):
    with pytest.raises(ConfigError):
        GbdEngine(decomposition, CutMode.SINGLE, DelayModel.situation(2, decomposition.sp_ids))


def test_delay_settings_build():
    ids = ["ac", "res#1", "res#2"]
    assert DelaySettings().build(ids).synchronous
    assert not DelaySettings().asynchronous
    model = DelaySettings(situation=3, n_min=3).build(ids)
    assert model.n_min == 3 and model.latencies["res#2"] == 4.0
    ratios = DelaySettings(latencies=[1, 1, 3], n_min=1).build(ids)
    assert ratios.latencies["res#2"] == 3.0 and ratios.n_min == 1


def test_gap_rule_is_off_by_default(decomposition):
    engine = GbdEngine(decomposition)
    assert engine.gap_tol == 0.0
    assert engine.residual_tol == pytest.approx(1e-5)


@pytest.mark.slow
def test_synchronous_multi_cut_converges(decomposition):
    result = run(decomposition)
    assert result.converged
    assert result.stop_rule is StopRule.RESIDUAL
    assert result.trace.records[-1].max_residual < 1e-5
    assert result.gap <= 0.02
    assert result.trace.lb_monotone()
    assert result.objective is not None and result.decisions is not None
    assert result.objective >= result.lb - 1e-6 * abs(result.lb)


@pytest.mark.slow
def test_multi_cut_needs_fewer_iterations_than_single(decomposition):
    multi = run(decomposition, CutMode.MULTI)
    single = run(decomposition, CutMode.SINGLE)
    assert multi.converged and single.converged
    assert multi.iterations < single.iterations
    assert single.trace.lb_monotone()


@pytest.mark.slow
def test_loose_gap_rule_stops_no_later(decomposition):
    strict = run(decomposition)
    loose = run(decomposition, gap_tol=0.5)
    assert loose.stop_rule in (StopRule.GAP, StopRule.RESIDUAL)
    assert loose.iterations <= strict.iterations


@pytest.mark.slow
def test_situation_one_matches_synchronous(decomposition):
    sync = run(decomposition)
    s1 = run(decomposition, delay=DelayModel.situation(1, decomposition.sp_ids))
    assert s1.trace.rows() == sync.trace.rows()
    assert s1.iterations == sync.iterations
    assert s1.objective == sync.objective


@pytest.mark.slow
@pytest.mark.parametrize("situation", [2, 3])
def test_delayed_situations_reach_residual_tolerance(decomposition, situation):
    result = run(decomposition, delay=DelayModel.situation(situation, decomposition.sp_ids))
    assert result.converged
    assert result.stop_rule is StopRule.RESIDUAL
    assert result.trace.records[-1].max_residual < 1e-5
    assert result.trace.lb_monotone()
    assert result.gap <= 0.02
    assert any(len(r.active) < len(decomposition.sp_ids) for r in result.trace.records)


@pytest.mark.slow
def test_gbd_agrees_with_centralized(fig4_case, base_point, scenario_set, decomposition):
    central = OpfService().solve_centralized(fig4_case, OpfMode.EROPF, op_point=base_point, scenarios=scenario_set)
    result = run(decomposition)
    assert central.solved and result.converged
    assert abs(result.objective - central.solution.objective) <= 5e-3 * abs(central.solution.objective)


@pytest.mark.slow
def test_asynchronous_run_is_reproducible(decomposition):
    delay = DelayModel.situation(3, decomposition.sp_ids, jitter=0.1, seed=11)
    first = run(decomposition, delay=delay)
    again = run(decomposition, delay=DelayModel.situation(3, decomposition.sp_ids, jitter=0.1, seed=11))
    assert first.trace.rows() == again.trace.rows()
    assert first.trace.lb_monotone()
    assert any(len(r.active) < 3 for r in first.trace.records)
