import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import ModelError
from formulation.program import ConicProgram, lin_sum
from solver.backends import equality_dual_sign, get_backend, solve_continuous
from solver.branch_bound import branch_and_bound, enumerate_binaries, most_fractional, solve_mixed
from solver.models import Solution, SolveStatus
from solver.residuals import check_cone_residuals


def fractional_program():
    """max y1 + y2 s.t. y1 + y2 <= 1.5: the relaxation optimum is fractional"""
    program = ConicProgram("fractional")
    y1 = program.add_variable("y1", binary=True)
    y2 = program.add_variable("y2", binary=True)
    program.add_constraint(y1 + y2, "<=", 1.5, name="cap")
    program.add_objective(-1.0 * y1 - 1.0 * y2)
    return program


def test_cone_program_optimum_and_duals(cone_program):
    solution = solve_continuous(cone_program)
    assert solution.optimal
    assert solution.objective == pytest.approx(5.0, abs=1e-6)
    assert solution.value(cone_program, "t") == pytest.approx(5.0, abs=1e-6)
    assert solution.duals["fix_p"] == pytest.approx(0.6, abs=1e-5)
    assert solution.duals["fix_q"] == pytest.approx(0.8, abs=1e-5)
    assert solution.cone_residual <= 1e-6


def test_inequality_dual_is_rhs_sensitivity():
    program = ConicProgram("floor")
    x = program.add_variable("x")
    program.add_constraint(x, ">=", 3.0, name="floor")
    program.add_objective(x)
    solution = solve_continuous(program)
    assert solution.objective == pytest.approx(3.0, abs=1e-7)
    assert solution.duals["floor"] == pytest.approx(1.0, abs=1e-6)


def test_upper_row_dual_sign():
    program = ConicProgram("ceiling")
    x = program.add_variable("x")
    program.add_constraint(x, "<=", 2.0, name="ceiling")
    program.add_objective(-1.0 * x)
    solution = solve_continuous(program)
    assert solution.duals["ceiling"] == pytest.approx(-1.0, abs=1e-6)


def test_equality_dual_sign_is_unit():
    assert equality_dual_sign("CLARABEL") in (1.0, -1.0)


def test_backend_resolves_after_rhs_change(cone_program):
    backend = get_backend("cvxpy").load(cone_program)
    assert backend.solve().objective == pytest.approx(5.0, abs=1e-6)
    cone_program.set_rhs("fix_p", 6.0)
    assert backend.solve().objective == pytest.approx(math.sqrt(52.0), abs=1e-6)


def test_crossed_bounds_are_infeasible(cone_program):
    backend = get_backend().load(cone_program)
    lower, upper = cone_program.bounds()
    lower[0], upper[0] = 2.0, 1.0
    assert backend.solve(lower, upper).status is SolveStatus.INFEASIBLE


def test_unknown_backend_rejected():
    with pytest.raises(ModelError):
        get_backend("gurobi")


def test_continuous_solve_refuses_free_binaries():
    with pytest.raises(ModelError):
        solve_continuous(fractional_program())


def test_most_fractional_picks_furthest_from_integral():
    x = np.array([0.1, 0.45, 0.7, 1.0])
    assert most_fractional(x, np.array([0, 1, 2, 3])) == 1
    assert most_fractional(np.array([0.0, 1.0 - 1e-8]), np.array([0, 1])) is None


def test_integral_relaxation_needs_one_node():
    program = ConicProgram("integral")
    y = program.add_variable("y", binary=True)
    x = program.add_variable("x", 0.0, 10.0)
    program.add_constraint(x + y, ">=", 1.0)
    program.add_objective(x + 2.0 * y)
    solution = solve_mixed(program)
    assert solution.optimal
    assert solution.nodes == 1
    assert solution.objective == pytest.approx(1.0, abs=1e-6)
    assert solution.mip_gap == pytest.approx(0.0, abs=1e-9)


def test_branching_closes_fractional_root():
    events = []
    solution = branch_and_bound(fractional_program(), gap=0.0, node_log=events.append)
    assert solution.optimal
    assert solution.objective == pytest.approx(-1.0, abs=1e-6)
    assert solution.nodes > 1
    assert events[0]["node"] == 0
    assert events[0]["outcome"].startswith("branch")
    assert any(e["outcome"] == "incumbent" for e in events)
    assert solution.diagnostics["root_bound"] == pytest.approx(-1.5, abs=1e-6)


def test_node_limit_without_incumbent():
    solution = branch_and_bound(fractional_program(), node_limit=1)
    assert solution.status is SolveStatus.GAP_LIMIT
    assert not solution.has_point


def test_infeasible_root():
    program = ConicProgram("infeasible")
    y = program.add_variable("y", binary=True)
    program.add_constraint(y, ">=", 2.0)
    program.add_objective(y)
    assert branch_and_bound(program).status is SolveStatus.INFEASIBLE


def test_unbounded_root():
    program = ConicProgram("unbounded")
    y = program.add_variable("y", binary=True)
    x = program.add_variable("x")
    program.add_constraint(x - y, "<=", 0.0)
    program.add_objective(x)
    assert branch_and_bound(program).status is SolveStatus.UNBOUNDED


def random_program(costs, weights, demand, coupling):
    program = ConicProgram("random")
    ys = [program.add_variable(f"y{k}", binary=True) for k in range(len(costs))]
    slack = program.add_variable("s", 0.0, 100.0)
    t = program.add_variable("t", 0.0, 100.0)
    program.add_constraint(lin_sum(w * y for w, y in zip(weights, ys)) + slack, ">=", demand, name="cover")
    program.add_soc(t, [ys[0] - 0.5, coupling * ys[-1]], name="spread")
    program.add_objective(lin_sum(c * y for c, y in zip(costs, ys)) + 3.0 * slack + t)
    return program


@pytest.mark.slow
@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-2.0, 2.0), min_size=n, max_size=n),
    st.lists(st.floats(0.1, 2.0), min_size=n, max_size=n),
    st.floats(0.0, 4.0),
    st.floats(0.0, 1.0),
)))
def test_branch_and_bound_matches_enumeration(data):
    costs, weights, demand, coupling = data
    program = random_program(costs, weights, demand, coupling)
    searched = branch_and_bound(program, gap=0.0)
    oracle = enumerate_binaries(program)
    assert searched.optimal and oracle.best.optimal
    assert searched.objective == pytest.approx(oracle.best.objective, rel=1e-5, abs=1e-5)


def test_enumeration_rejects_continuous_names(cone_program):
    with pytest.raises(ModelError):
        enumerate_binaries(cone_program, ["t"])


def test_enumeration_lists_every_assignment():
    result = enumerate_binaries(fractional_program())
    assert len(result.outcomes) == 4
    assert result.best.objective == pytest.approx(-1.0, abs=1e-6)
    infeasible = [a for a, status, _ in result.outcomes if status == "infeasible"]
    assert infeasible == [{"y1": 1, "y2": 1}]


def test_cone_residuals_tight_at_optimum(cone_program):
    solution = solve_continuous(cone_program)
    report = check_cone_residuals(solution, cone_program)
    assert report.tight
    assert report.max_relative <= 1e-4


def test_cone_residuals_flag_slack_point(cone_program):
    solution = Solution(SolveStatus.OPTIMAL, x=np.array([6.0, 3.0, 4.0]))
    report = check_cone_residuals(solution, cone_program)
    assert not report.tight
    assert report.flagged[0].name == "norm"
    assert report.flagged[0].slack == pytest.approx(1.0)
    assert report.flagged[0].relative == pytest.approx(1.0 / 6.0)


def test_cone_residuals_need_a_point(cone_program):
    with pytest.raises(ModelError):
        check_cone_residuals(Solution(SolveStatus.INFEASIBLE), cone_program)


def test_reference_backend_agrees_with_cvxpy():
    program = ConicProgram("small")
    x = program.add_variable("x", 0.0, 4.0)
    y = program.add_variable("y", 0.0, 4.0)
    t = program.add_variable("t", 0.0, 10.0)
    program.add_constraint(x + y, ">=", 2.0, name="demand")
    program.add_soc(t, [x - 1.0, y - 2.0], name="distance")
    program.add_objective(2.0 * x + y + t)

    reference = get_backend("reference").load(program).solve()
    cvx = get_backend("cvxpy").load(program).solve()
    assert reference.optimal and cvx.optimal
    assert reference.objective == pytest.approx(cvx.objective, abs=1e-5)
    assert reference.x == pytest.approx(cvx.x, abs=1e-3)


def test_reference_backend_duals(cone_program):
    solution = get_backend("reference").load(cone_program).solve()
    assert solution.objective == pytest.approx(5.0, abs=1e-6)
    assert solution.duals["fix_p"] == pytest.approx(0.6, abs=1e-4)
    assert solution.duals["fix_q"] == pytest.approx(0.8, abs=1e-4)
    assert solution.diagnostics["barrier_gap"] < 1e-7


def test_reference_duals_follow_rhs_changes(cone_program):
    backend = get_backend("reference").load(cone_program)
    cone_program.set_rhs("fix_p", 6.0)
    solution = backend.solve()
    assert solution.objective == pytest.approx(math.sqrt(52.0), abs=1e-6)
    assert solution.duals["fix_p"] == pytest.approx(6.0 / math.sqrt(52.0), abs=1e-4)
    assert solution.duals["fix_q"] == pytest.approx(4.0 / math.sqrt(52.0), abs=1e-4)


def test_reference_inequality_dual():
    program = ConicProgram("floor")
    x = program.add_variable("x")
    program.add_constraint(x, ">=", 3.0, name="floor")
    program.add_objective(x)
    solution = get_backend("reference").load(program).solve()
    assert solution.objective == pytest.approx(3.0, abs=1e-6)
    assert solution.duals["floor"] == pytest.approx(1.0, abs=1e-5)
