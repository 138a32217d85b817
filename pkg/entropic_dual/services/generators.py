from __future__ import annotations

import logging
import math

import numpy as np

from entropic_dual.services.core import InstanceError, LpInstance, OtInstance, SdpInstance, SymMatrix

LOGGER = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MULT_1 = 0xBF58476D1CE4E5B9
MIX_MULT_2 = 0x94D049BB133111EB
SDP_ATTEMPTS = 10


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX_MULT_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MULT_2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 stream: state advances by the golden gamma, outputs pass the
    30/27/31 xor-shift-multiply finalizer.

    uniform() keeps the top 53 bits of each output, normal() pairs uniforms
    through Box-Muller. Outputs are bit-for-bit reproducible from the seed.
    """

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & MASK64
        self._state = self.seed

    def next_uint64(self, count: int) -> np.ndarray:
        steps = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + steps * np.uint64(GOLDEN_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_MULT_1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_MULT_2)
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + count * GOLDEN_GAMMA) & MASK64
        return z

    def uniform(self, size: int) -> np.ndarray:
        bits = self.next_uint64(size) >> np.uint64(11)
        return bits.astype(np.float64) * 2.0**-53

    def normal(self, size: int) -> np.ndarray:
        pairs = (size + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * math.pi * u[:, 1]
        z = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
        return z.ravel()[:size]

    def substream(self, k: int) -> SplitMix64:
        return SplitMix64(_mix64((self.seed + (k + 1) * GOLDEN_GAMMA) & MASK64))


def generate_lp(seed: int, d: int, m: int, with_compactness_row: bool = False) -> tuple[LpInstance, np.ndarray]:
    """Random feasible LP with b = A x0 for a positive x0.

    Draw order: A (standard normal, row-major), x0 (uniform in [0.5, 1.5)),
    c (uniform in [0, 1)). With the compactness row the first row of A is all
    ones, so A^T e_1 > 0.
    """
    if m < 1 or d < 1:
        raise InstanceError(f"dimensions must be positive, got d={d}, m={m}")
    if m > d:
        raise InstanceError(f"need m <= d, got d={d}, m={m}")
    rng = SplitMix64(seed)
    con_matrix = rng.normal(m * d).reshape(m, d)
    if with_compactness_row:
        con_matrix[0] = 1.0
    x0 = 0.5 + rng.uniform(d)
    cost = rng.uniform(d)
    rhs = con_matrix @ x0
    return LpInstance(cost=cost, con_matrix=con_matrix, rhs=rhs), x0


def _random_symmetric(rng: SplitMix64, n: int) -> np.ndarray:
    g = rng.normal(n * n).reshape(n, n)
    return (g + g.T) / (2.0 * math.sqrt(n))


def generate_sdp(seed: int, n: int, m: int, with_trace_row: bool = False) -> tuple[SdpInstance, SymMatrix]:
    """Random feasible SDP with b_k = Tr(A_k X0), X0 = M^T M / n + 0.1 I."""
    if n < 1 or m < 1:
        raise InstanceError(f"dimensions must be positive, got n={n}, m={m}")
    if m > n * (n + 1) // 2:
        raise InstanceError(f"need m <= n(n+1)/2 = {n * (n + 1) // 2}, got m={m}")

    base = SplitMix64(seed)
    for attempt in range(SDP_ATTEMPTS):
        rng = base if attempt == 0 else base.substream(attempt)
        cost = _random_symmetric(rng, n)
        matrices = [_random_symmetric(rng, n) for _ in range(m)]
        if with_trace_row:
            matrices[0] = np.eye(n)
        factor = rng.normal(n * n).reshape(n, n)
        x0 = factor.T @ factor / n + 0.1 * np.eye(n)
        rhs = np.array([float(np.sum(a * x0)) for a in matrices])
        try:
            inst = SdpInstance(cost=SymMatrix(cost), con_matrices=tuple(SymMatrix(a) for a in matrices), rhs=rhs)
        except InstanceError as exc:
            LOGGER.warning("SDP draw %d for seed %d rejected (%s), trying next substream", attempt, seed, exc)
            continue
        return inst, SymMatrix(x0)
    raise InstanceError(f"could not draw independent constraint matrices in {SDP_ATTEMPTS} attempts")


def generate_ot(seed: int, n1: int, n2: int) -> OtInstance:
    """Random transport problem: cost uniform in [0, 1), marginals normalized uniform(0.5, 1.5) draws."""
    if n1 < 1 or n2 < 1:
        raise InstanceError(f"dimensions must be positive, got n1={n1}, n2={n2}")
    rng = SplitMix64(seed)
    cost = rng.uniform(n1 * n2).reshape(n1, n2)
    source = 0.5 + rng.uniform(n1)
    target = 0.5 + rng.uniform(n2)
    return OtInstance(cost=cost, source=source / source.sum(), target=target / target.sum())
