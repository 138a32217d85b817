from __future__ import annotations

import math

import numpy as np
import pytest

from entropic_dual.services.core import ConfigError, LpInstance, SdpInstance, SolverConfig, SymMatrix
from entropic_dual.services.generators import generate_lp
from entropic_dual.services.lp_dual import lp_dual_eval
from entropic_dual.services.optimizer import (
    VALUE_NOISE,
    NonFiniteStartError,
    Schedule,
    lp_start,
    maximize_concave,
    solve_continuation,
    solve_lp,
    solve_sdp,
)
from entropic_dual.services.ot import ot_to_lp, sinkhorn

NEGATIVE_COST_LP = LpInstance(cost=[-1.0, -1.0], con_matrix=[[1.0, 1.0]], rhs=[1.0])
UNBOUNDED_LP = LpInstance(cost=[-1.0, -1.0], con_matrix=[[1.0, -1.0]], rhs=[1.0])


def assert_monotone(trace):
    values = [entry.dual_value for entry in trace]
    for before, after in zip(values, values[1:]):
        assert after >= before - VALUE_NOISE * (1.0 + abs(before))


def test_schedule_epsilons():
    assert Schedule(1.0, 0.5, 4).epsilons() == [1.0, 0.5, 0.25, 0.125]
    assert Schedule.parse("0.1, 0.1, 3").epsilons() == pytest.approx([0.1, 0.01, 0.001])


@pytest.mark.parametrize("text", ["1,0.5", "1,1.5,3", "0,0.5,3", "1,0.5,0", "a,b,c"])
def test_schedule_rejects_invalid(text):
    with pytest.raises(ConfigError):
        Schedule.parse(text)


def test_maximizes_concave_quadratic():
    target = np.array([1.0, 2.0])

    def evaluate(lam):
        diff = lam - target
        return -float(diff @ diff), -2.0 * diff

    result = maximize_concave(evaluate, np.zeros(2), SolverConfig(grad_tol=1e-10))
    assert result.converged
    assert result.point == pytest.approx(target, abs=1e-8)
    assert_monotone(result.trace)


def test_simplex_dual_optimum(simplex_lp):
    def evaluate(lam):
        return lp_dual_eval(simplex_lp, lam, 1.0)

    result = maximize_concave(evaluate, np.zeros(1), SolverConfig(epsilon=1.0, grad_tol=1e-10))
    assert result.converged
    assert result.point[0] == pytest.approx(1.0 - math.log(2.0), abs=1e-9)
    assert result.value == pytest.approx(-math.log(2.0), abs=1e-12)


def test_non_finite_start_raises():
    with pytest.raises(NonFiniteStartError):
        maximize_concave(lambda lam: (-math.inf, np.ones(1)), np.zeros(1), SolverConfig())


def test_line_search_failure_is_reported():
    def evaluate(lam):
        if np.all(lam == 0.0):
            return 0.0, np.ones(1)
        return -math.inf, np.ones(1)

    result = maximize_concave(evaluate, np.zeros(1), SolverConfig())
    assert not result.converged
    assert result.iterations == 0
    assert result.message.startswith("line search failed")
    assert result.point == pytest.approx([0.0])


def test_iteration_limit_is_reported(toy_lp):
    report = solve_lp(toy_lp, SolverConfig(max_iter=1))
    assert not report.converged
    assert report.iterations == 1
    assert "iteration limit" in report.message


def test_solve_lp_simplex(simplex_lp):
    report = solve_lp(simplex_lp, SolverConfig(epsilon=1.0))
    assert report.converged
    assert report.primal_array() == pytest.approx([0.5, 0.5], abs=1e-8)
    assert report.dual_value == pytest.approx(-math.log(2.0), abs=1e-12)
    assert report.duality_gap <= 1e-9


def test_solve_lp_reproduces_transport_value(toy_ot):
    lp, _ = ot_to_lp(toy_ot)
    report = solve_lp(lp, SolverConfig(epsilon=0.01))
    assert report.converged
    assert report.dual_value == pytest.approx(1.7906, abs=5e-4)
    assert report.grad_inf_norm <= 1e-5
    assert report.duality_gap <= 1e-6 * (1.0 + abs(report.dual_value))
    assert_monotone(report.trace)


def test_converged_solve_is_feasible(small_lp):
    inst, _ = small_lp
    config = SolverConfig(epsilon=0.1)
    report = solve_lp(inst, config)
    assert report.converged
    residual = inst.con_matrix @ report.primal_array() - inst.rhs
    assert np.max(np.abs(residual)) <= 10 * 1e-8
    assert report.duality_gap <= 1e-6 * (1.0 + abs(report.dual_value))


def test_solve_sdp_trace_instance(trace_sdp):
    report = solve_sdp(trace_sdp, SolverConfig(epsilon=1.0))
    assert report.converged
    assert report.primal_array() == pytest.approx(np.eye(2) / 2.0, abs=1e-6)
    assert report.dual_value == pytest.approx(-math.log(2.0), abs=1e-10)


def test_diagonal_sdp_matches_lp(half_mass):
    lp = half_mass(4, 5, 2)
    sdp = SdpInstance(
        cost=SymMatrix.diag(lp.cost),
        con_matrices=tuple(SymMatrix.diag(row) for row in lp.con_matrix),
        rhs=lp.rhs,
    )
    config = SolverConfig(epsilon=0.1, grad_tol=1e-10)
    lp_report = solve_lp(lp, config)
    sdp_report = solve_sdp(sdp, config)
    assert lp_report.converged and sdp_report.converged
    assert sdp_report.dual_value == pytest.approx(lp_report.dual_value, abs=1e-8)
    assert np.diag(sdp_report.primal_array()) == pytest.approx(lp_report.primal_array(), abs=1e-7)


def test_continuation_keeps_uniform_point(simplex_lp):
    reports = solve_continuation(simplex_lp, Schedule(1.0, 0.5, 6), SolverConfig())
    assert len(reports) == 6
    for report in reports:
        assert report.converged
        assert report.primal_array() == pytest.approx([0.5, 0.5], abs=1e-8)


def test_continuation_selects_entropy_minimal_optimum(degenerate_lp):
    reports = solve_continuation(degenerate_lp, Schedule(1.0, 0.1, 5), SolverConfig())
    assert [r.epsilon for r in reports] == pytest.approx([1.0, 0.1, 0.01, 1e-3, 1e-4])
    assert all(r.converged for r in reports)
    assert reports[-1].primal_array() == pytest.approx([0.5, 0.5, 0.0], abs=1e-3)


def test_continuation_approaches_transport_cost(toy_ot):
    lp, _ = ot_to_lp(toy_ot)
    reports = solve_continuation(lp, Schedule(0.1, 0.1, 3), SolverConfig())
    gaps = [abs(r.dual_value - 1.8) for r in reports]
    assert all(r.converged for r in reports)
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 2e-3


def test_continuation_restarts_after_failed_step(toy_lp):
    reports = solve_continuation(toy_lp, Schedule(0.1, 0.5, 3), SolverConfig(max_iter=1))
    assert len(reports) == 3
    assert not any(r.converged for r in reports)
    for report in reports:
        assert report.trace[0].dual_value == pytest.approx(lp_dual_eval(toy_lp, np.zeros(3), report.epsilon)[0])


def test_step_limit_keeps_trials_inside_finite_region():
    seen = []

    def evaluate(lam):
        seen.append(float(lam[0]))
        if lam[0] > 6.0:
            return -math.inf, np.ones(1)
        return float(lam[0] - math.exp(lam[0] - 3.0)), np.array([1.0 - math.exp(lam[0] - 3.0)])

    def limit(lam, direction):
        return (6.0 - lam[0]) / direction[0] if direction[0] > 0.0 else math.inf

    result = maximize_concave(evaluate, np.zeros(1), SolverConfig(grad_tol=1e-10), limit)
    assert result.converged
    assert result.point == pytest.approx([3.0], abs=1e-8)
    assert max(seen) <= 6.0 + 1e-9


def test_line_search_finds_tiny_finite_steps():
    def evaluate(lam):
        if lam[0] > 1e-18:
            return -math.inf, np.ones(1)
        return float(lam[0]), np.ones(1)

    result = maximize_concave(evaluate, np.zeros(1), SolverConfig(max_iter=3))
    assert result.iterations >= 1
    assert 0.0 < result.point[0] <= 1e-18


@pytest.mark.parametrize("eps", [0.1, 0.05, 0.01])
def test_transport_toy_converges_from_flat_start(toy_ot, eps):
    lp, _ = ot_to_lp(toy_ot)
    report = solve_lp(lp, SolverConfig(epsilon=eps))
    assert report.converged, report.message
    assert report.message == "gradient tolerance reached"
    assert report.dual_value == pytest.approx(sinkhorn(toy_ot, eps).value, abs=1e-6)
    assert_monotone(report.trace)


@pytest.mark.parametrize("seed", range(5))
def test_accepted_values_never_drop_beyond_round_off(seed):
    inst, _ = generate_lp(seed, 40, 5, with_compactness_row=True)
    report = solve_lp(inst, SolverConfig(epsilon=0.01))
    assert report.iterations > 1
    assert_monotone(report.trace)


def test_lp_start_is_zero_when_finite(toy_lp):
    assert np.array_equal(lp_start(toy_lp, 0.01, 700.0), np.zeros(3))


def test_overflowing_zero_start_is_shifted():
    eps = 1e-3
    start = lp_start(NEGATIVE_COST_LP, eps, 700.0)
    assert math.isfinite(lp_dual_eval(NEGATIVE_COST_LP, start, eps)[0])
    report = solve_lp(NEGATIVE_COST_LP, SolverConfig(epsilon=eps))
    assert report.converged
    assert report.primal_array() == pytest.approx([0.5, 0.5], abs=1e-6)
    assert report.dual_value == pytest.approx(-1.0 - eps * math.log(2.0), abs=1e-9)


def test_overflowing_sdp_start_is_shifted():
    eps = 1e-3
    inst = SdpInstance(cost=SymMatrix(-np.eye(2)), con_matrices=(SymMatrix.identity(2),), rhs=[1.0])
    report = solve_sdp(inst, SolverConfig(epsilon=eps))
    assert report.converged
    assert report.primal_array() == pytest.approx(np.eye(2) / 2.0, abs=1e-6)
    assert report.dual_value == pytest.approx(-1.0 - eps * math.log(2.0), abs=1e-8)


def test_solve_without_finite_start_raises():
    with pytest.raises(NonFiniteStartError, match="larger epsilon"):
        solve_lp(UNBOUNDED_LP, SolverConfig(epsilon=1e-3))


def test_continuation_reports_every_step_after_overflowing_zero():
    reports = solve_continuation(NEGATIVE_COST_LP, Schedule(0.01, 0.1, 2), SolverConfig(max_iter=1))
    assert [r.epsilon for r in reports] == pytest.approx([0.01, 1e-3])
    assert math.isfinite(reports[1].trace[0].dual_value)


def test_continuation_records_step_that_cannot_start():
    reports = solve_continuation(UNBOUNDED_LP, Schedule(0.01, 0.1, 2), SolverConfig(max_iter=5))
    assert len(reports) == 2
    failed = reports[1]
    assert not failed.converged
    assert failed.iterations == 0
    assert failed.dual_value == -math.inf
    assert "larger epsilon" in failed.message


@pytest.mark.parametrize("schedule", [Schedule(0.1, 0.1, 3), Schedule(0.1, 0.5, 4)])
def test_warm_starts_do_not_cost_iterations(toy_lp, schedule):
    warm = solve_continuation(toy_lp, schedule, SolverConfig())
    cold = [solve_lp(toy_lp, SolverConfig(epsilon=eps)) for eps in schedule.epsilons()]
    assert all(r.converged for r in warm + cold)
    assert sum(r.iterations for r in warm) <= sum(r.iterations for r in cold)
