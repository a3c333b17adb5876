import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import ConvergenceError, LinearizationError
from grid.loader import case_from_dict
from powerflow.linearization import (
    accuracy_study, branch_flows, flow_coefficients, linearize, solve_base_power_flow, update_operating_point,
)
from powerflow.newton import NodalInjections, build_ybus, solve_power_flow


def test_two_bus_analytic_voltage(two_bus_resistive):
    result = solve_power_flow(two_bus_resistive)
    assert result.v[1] == pytest.approx((1 + math.sqrt(0.96)) / 2, abs=1e-8)
    assert result.theta[1] == pytest.approx(0.0, abs=1e-10)
    assert result.residual <= 1e-8


def test_zero_load_case_is_flat():
    case = case_from_dict({
        "ac_nodes": [{"id": 1, "slack": True}, {"id": 2}, {"id": 3}],
        "ac_branches": [{"id": 1, "from": 1, "to": 2, "r": 0.01, "x": 0.1},
                        {"id": 2, "from": 2, "to": 3, "r": 0.01, "x": 0.1}],
    })
    result = solve_power_flow(case)
    assert result.iterations == 0
    assert np.allclose(result.v, 1.0)
    assert np.allclose(result.theta, 0.0)


def test_bundled_case_converges_quickly(base_point):
    assert base_point.iterations <= 10
    assert base_point.residual <= 1e-8
    assert np.all(base_point.u > 0.8)


def test_iteration_cap_raises_with_trace(fig4_case):
    with pytest.raises(ConvergenceError) as info:
        solve_power_flow(fig4_case, max_iter=1, tol=1e-14)
    assert len(info.value.trace) == 2


def test_ybus_rows_sum_to_shunts(fig4_case):
    ybus = build_ybus(fig4_case).toarray()
    assert np.allclose(ybus.sum(axis=1), 0.0)
    assert np.allclose(ybus, ybus.T)


def test_linear_model_exact_at_expansion_point(fig4_case, base_point):
    for branch in fig4_case.ac_branches:
        i, j = branch.from_node, branch.to_node
        u_i, u_j = base_point.u_of(i), base_point.u_of(j)
        t = base_point.theta_of(i) - base_point.theta_of(j)
        coeffs = base_point.coeffs[branch.id]
        p, q = branch_flows(u_i, u_j, t, branch.g, branch.b)
        assert coeffs.forward.p(u_i, u_j, t) == pytest.approx(p, abs=1e-10)
        assert coeffs.forward.q(u_i, u_j, t) == pytest.approx(q, abs=1e-10)
        p_back, q_back = branch_flows(u_j, u_i, -t, branch.g, branch.b)
        assert coeffs.reverse.p(u_j, u_i, -t) == pytest.approx(p_back, abs=1e-10)
        assert coeffs.reverse.q(u_j, u_i, -t) == pytest.approx(q_back, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.9, 1.1), st.floats(0.9, 1.1), st.floats(-0.2, 0.2))
def test_linear_terms_match_model(u_i, u_j, t):
    coeffs = flow_coefficients(u_i, u_j, t, 1.0, -10.0)
    cu_i, cu_j, ct, const = coeffs.p_terms()
    point = (u_i + 0.01, u_j - 0.02, t + 0.03)
    assert cu_i * point[0] + cu_j * point[1] + ct * point[2] + const == pytest.approx(coeffs.p(*point), abs=1e-12)
    cu_i, cu_j, ct, const = coeffs.q_terms()
    assert cu_i * point[0] + cu_j * point[1] + ct * point[2] + const == pytest.approx(coeffs.q(*point), abs=1e-12)


def test_linearization_error_is_second_order():
    g, b = 1.0, -10.0
    u_i, u_j, t = 1.02, 0.98, 0.05
    coeffs = flow_coefficients(u_i, u_j, t, g, b)
    direction = np.array([1.0, -0.7, 0.5])

    def error(eps):
        du_i, du_j, dt = eps * direction
        exact, _ = branch_flows(u_i + du_i, u_j + du_j, t + dt, g, b)
        return abs(coeffs.p(u_i + du_i, u_j + du_j, t + dt) - exact)

    ratio = error(1e-3) / error(5e-4)
    assert 3.5 < ratio < 4.5


def test_non_positive_expansion_point_rejected(fig4_case, base_point):
    with pytest.raises(LinearizationError):
        flow_coefficients(0.0, 1.0, 0.0, 1.0, -10.0)
    broken = solve_base_power_flow(fig4_case)
    broken.u = broken.u.copy()
    broken.u[2] = -1.0
    with pytest.raises(LinearizationError):
        linearize(broken, fig4_case)


def test_identical_injections_keep_the_point(fig4_case, base_point):
    result = update_operating_point(base_point, base_point.injections, fig4_case)
    assert result.point is base_point
    assert result.updated


def test_update_relinearizes_at_new_injections(fig4_case, base_point):
    injections = NodalInjections.from_case(fig4_case)
    injections.p = injections.p * 0.9
    injections.u_lin = base_point.u.copy()
    result = update_operating_point(base_point, injections, fig4_case)
    assert result.point is not base_point
    assert result.accuracy == pytest.approx(float(np.max(np.abs(base_point.u - result.point.u))))
    assert set(result.point.coeffs) == {b.id for b in fig4_case.ac_branches}


def test_failed_update_keeps_previous_point(fig4_case, base_point):
    injections = NodalInjections.from_case(fig4_case)
    injections.p = injections.p * 50.0
    result = update_operating_point(base_point, injections, fig4_case)
    assert not result.updated
    assert result.point is base_point


def test_accuracy_study_records_every_round(fig4_case, base_point):
    offsets = iter([1e-3, 5e-4, 2e-4])

    def solve_fn(point):
        injections = NodalInjections.from_case(fig4_case)
        injections.u_lin = point.u + next(offsets)
        return injections

    study = accuracy_study(fig4_case, 2, solve_fn, op_point=base_point)
    assert study.errors == pytest.approx([1e-3, 5e-4, 2e-4])
    assert study.non_increasing()
    assert len(study.rows) == 3 * len(fig4_case.ac_nodes)
    assert not study.failures


def test_negative_rounds_rejected(fig4_case):
    with pytest.raises(LinearizationError):
        accuracy_study(fig4_case, -1, lambda point: None)


@pytest.mark.slow
def test_opf_relinearization_does_not_degrade(fig4_case):
    from services.opf_service import OpfService

    study = OpfService().accuracy(fig4_case, 2)
    assert len(study.errors) == 3
    assert study.errors[0] is not None
    assert study.final_error <= study.errors[0] + 1e-6
