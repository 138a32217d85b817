from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entropic_dual.services.core import InstanceError
from entropic_dual.services.generators import SplitMix64, generate_lp, generate_ot, generate_sdp


def test_splitmix_reference_output():
    assert int(SplitMix64(0).next_uint64(1)[0]) == 0xE220A8397B1DCDAF


def test_splitmix_stream_continues_across_calls():
    joined = SplitMix64(42).next_uint64(6)
    rng = SplitMix64(42)
    split = np.concatenate([rng.next_uint64(2), rng.next_uint64(4)])
    assert np.array_equal(joined, split)


def test_splitmix_uniform_and_normal_ranges():
    rng = SplitMix64(7)
    u = rng.uniform(10000)
    assert np.all((u >= 0.0) & (u < 1.0))
    z = rng.normal(10001)
    assert z.shape == (10001,)
    assert abs(float(np.mean(z))) < 0.05
    assert abs(float(np.std(z)) - 1.0) < 0.05


def test_substreams_differ():
    base = SplitMix64(5)
    assert not np.array_equal(base.substream(1).uniform(4), base.substream(2).uniform(4))


def test_lp_generator_is_feasible_by_construction():
    inst, x0 = generate_lp(1, 4, 2)
    assert np.array_equal(inst.con_matrix @ x0, inst.rhs)
    assert np.all((x0 >= 0.5) & (x0 < 1.5))
    assert np.all((inst.cost >= 0.0) & (inst.cost < 1.0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_lp_generator_is_deterministic(seed):
    first, x1 = generate_lp(seed, 5, 3)
    second, x2 = generate_lp(seed, 5, 3)
    assert np.array_equal(first.con_matrix, second.con_matrix)
    assert np.array_equal(first.cost, second.cost)
    assert np.array_equal(x1, x2)


def test_lp_compactness_row():
    inst, x0 = generate_lp(2, 6, 3, with_compactness_row=True)
    assert np.array_equal(inst.con_matrix[0], np.ones(6))
    assert inst.rhs[0] == pytest.approx(float(np.sum(x0)))


def test_lp_generator_rejects_wide_constraints():
    with pytest.raises(InstanceError):
        generate_lp(1, 2, 3)


def test_sdp_generator_trace_row():
    inst, x0 = generate_sdp(1, 3, 1, with_trace_row=True)
    assert np.array_equal(inst.con_matrices[0].entries, np.eye(3))
    assert inst.rhs[0] == pytest.approx(float(np.trace(x0.entries)))
    assert inst.rhs[0] > 0.0


def test_sdp_generator_feasible_point():
    inst, x0 = generate_sdp(3, 5, 6)
    assert np.linalg.eigvalsh(x0.entries)[0] >= 0.1 - 1e-12
    for a, b in zip(inst.con_matrices, inst.rhs):
        assert float(np.sum(a.entries * x0.entries)) == pytest.approx(b)


def test_sdp_generator_is_deterministic():
    first, _ = generate_sdp(8, 4, 3)
    second, _ = generate_sdp(8, 4, 3)
    assert np.array_equal(first.stacked, second.stacked)


def test_sdp_generator_rejects_too_many_constraints():
    with pytest.raises(InstanceError):
        generate_sdp(1, 2, 4)


def test_ot_generator_marginals():
    ot = generate_ot(3, 4, 6)
    assert ot.cost.shape == (4, 6)
    assert float(np.sum(ot.source)) == pytest.approx(1.0, abs=1e-12)
    assert np.all(ot.target > 0.0)
