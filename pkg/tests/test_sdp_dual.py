from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import linalg

from entropic_dual.services.core import DimensionError, SdpInstance, SymMatrix, sdp_primal_objective
from entropic_dual.services.generators import generate_sdp
from entropic_dual.services.lp_dual import lp_dual_eval
from entropic_dual.services.sdp_dual import (
    adjoint_map,
    constraint_map,
    mat_exp_sym,
    sdp_dual_eval,
    sdp_primal_point,
    sym_eig,
    trace_bounds,
)

INSTANCE, FEASIBLE = generate_sdp(5, 6, 4, with_trace_row=True)

seeds = st.integers(0, 2**32 - 1)


def multipliers(m: int, bound: float = 1.0):
    return st.lists(st.floats(-bound, bound), min_size=m, max_size=m).map(np.array)


def test_sym_eig_reconstructs():
    m = SymMatrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    q, sigma = sym_eig(m)
    assert sigma == pytest.approx([1.0, 3.0])
    assert (q * sigma) @ q.T == pytest.approx(m.entries)


def test_mat_exp_matches_scipy():
    rng = np.random.default_rng(3)
    g = rng.normal(size=(5, 5))
    m = SymMatrix(g + g.T)
    assert mat_exp_sym(m).entries == pytest.approx(linalg.expm(m.entries), rel=1e-10)


def test_closed_form_on_trace_instance(trace_sdp):
    lam = np.array([1.0 - math.log(2.0)])
    value, gradient = sdp_dual_eval(trace_sdp, lam, 1.0)
    assert value == pytest.approx(-math.log(2.0))
    assert gradient == pytest.approx([0.0], abs=1e-14)
    assert sdp_primal_point(trace_sdp, lam, 1.0).entries == pytest.approx(np.eye(2) / 2.0)


def test_adjoint_and_constraint_maps_are_adjoint():
    rng = np.random.default_rng(4)
    lam = rng.normal(size=INSTANCE.num_cons)
    g = rng.normal(size=(INSTANCE.dim, INSTANCE.dim))
    x = SymMatrix(g + g.T)
    lhs = float(np.sum(adjoint_map(INSTANCE, lam) * x.entries))
    rhs = float(lam @ constraint_map(INSTANCE, x))
    assert lhs == pytest.approx(rhs)


def test_constraint_map_checks_size():
    with pytest.raises(DimensionError):
        constraint_map(INSTANCE, SymMatrix.identity(3))


def test_overflow_returns_sentinel(trace_sdp):
    value, _ = sdp_dual_eval(trace_sdp, np.array([10.0]), 1e-3)
    assert value == -math.inf


@settings(max_examples=100, deadline=None)
@given(multipliers(4))
def test_gradient_matches_central_differences(lam):
    eps = 1.0
    _, gradient = sdp_dual_eval(INSTANCE, lam, eps)
    h = 1e-5
    fd = np.empty(4)
    for k in range(4):
        step = np.zeros(4)
        step[k] = h
        fd[k] = (sdp_dual_eval(INSTANCE, lam + step, eps)[0] - sdp_dual_eval(INSTANCE, lam - step, eps)[0]) / (2 * h)
    assert np.max(np.abs(fd - gradient)) <= 1e-5 * (1.0 + np.max(np.abs(gradient)))


@settings(max_examples=100, deadline=None)
@given(multipliers(4, bound=5.0), st.sampled_from([1.0, 0.1]))
def test_weak_duality(lam, eps):
    value, _ = sdp_dual_eval(INSTANCE, lam, eps)
    bound = sdp_primal_objective(INSTANCE, FEASIBLE, eps)
    assert value <= bound + 1e-9 * (1.0 + abs(bound))


@settings(max_examples=100, deadline=None)
@given(multipliers(4), multipliers(4), st.floats(0.0, 1.0))
def test_dual_is_concave_along_segments(lam1, lam2, t):
    eps = 1.0
    mid, _ = sdp_dual_eval(INSTANCE, t * lam1 + (1.0 - t) * lam2, eps)
    chord = t * sdp_dual_eval(INSTANCE, lam1, eps)[0] + (1.0 - t) * sdp_dual_eval(INSTANCE, lam2, eps)[0]
    assert mid >= chord - 1e-9 * (1.0 + abs(chord))


@settings(max_examples=50, deadline=None)
@given(multipliers(4))
def test_dual_decreases_along_coercive_rays(direction):
    norm = float(np.linalg.norm(direction))
    assume(norm >= 0.1)
    unit = direction / norm
    eps = 0.1
    values = [sdp_dual_eval(INSTANCE, t * unit, eps)[0] for t in (10.0, 100.0, 1000.0)]
    _, gradient = sdp_dual_eval(INSTANCE, 10.0 * unit, eps)
    assume(values[0] == -math.inf or float(gradient @ unit) < 0.0)
    for near, far in zip(values, values[1:]):
        assert far == -math.inf or far < near


@settings(max_examples=100, deadline=None)
@given(multipliers(4))
def test_primal_point_is_positive_definite(lam):
    x = sdp_primal_point(INSTANCE, lam, 1.0)
    assert linalg.eigvalsh(x.entries)[0] > 0.0


def test_diagonal_instance_reduces_to_lp(half_mass):
    lp = half_mass(2, 5, 2)
    sdp = SdpInstance(
        cost=SymMatrix.diag(lp.cost),
        con_matrices=tuple(SymMatrix.diag(row) for row in lp.con_matrix),
        rhs=lp.rhs,
    )
    rng = np.random.default_rng(5)
    for _ in range(20):
        lam = rng.normal(size=2)
        sdp_value, sdp_grad = sdp_dual_eval(sdp, lam, 0.5)
        lp_value, lp_grad = lp_dual_eval(lp, lam, 0.5)
        assert sdp_value == pytest.approx(lp_value, rel=1e-12, abs=1e-12)
        assert sdp_grad == pytest.approx(lp_grad, rel=1e-10, abs=1e-12)


@settings(max_examples=1000, deadline=None)
@given(seeds, st.integers(1, 6))
def test_trace_sandwich(seed, n):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n, n))
    a = SymMatrix(g + g.T)
    f = rng.normal(size=(n, n))
    b = SymMatrix(f @ f.T)
    lower, upper = trace_bounds(a, b)
    trace = float(np.sum(a.entries * b.entries))
    tol = 1e-9 * (1.0 + a.frobenius_norm() * b.frobenius_norm())
    assert lower - tol <= trace <= upper + tol


def test_trace_bounds_require_psd():
    with pytest.raises(ValueError):
        trace_bounds(SymMatrix.identity(2), SymMatrix.diag([1.0, -1.0]))
