from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from entropic_dual.services.core import DEFAULT_EXP_CLAMP, LpInstance, check_length


def _check_epsilon(epsilon: float) -> None:
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")


def _clamped_exponent(
    inst: LpInstance,
    lam,
    epsilon: float,
    exp_clamp: float,
) -> tuple[np.ndarray, bool]:
    _check_epsilon(epsilon)
    multipliers = check_length(lam, inst.num_cons, "lambda")
    exponent = (inst.con_matrix.T @ multipliers - inst.cost) / epsilon - 1.0
    overflow = bool(np.any(exponent > exp_clamp))
    # The lower clamp only guards against underflow to exact zero.
    return np.clip(exponent, -exp_clamp, exp_clamp), overflow


def lp_primal_point(
    inst: LpInstance,
    lam,
    epsilon: float,
    exp_clamp: float = DEFAULT_EXP_CLAMP,
) -> np.ndarray:
    """Unique minimizer of the Lagrangian: x_i = exp((A^T lam - c)_i / eps - 1)."""
    exponent, _ = _clamped_exponent(inst, lam, epsilon, exp_clamp)
    return np.exp(exponent)


def lp_dual_eval(
    inst: LpInstance,
    lam,
    epsilon: float,
    exp_clamp: float = DEFAULT_EXP_CLAMP,
) -> tuple[float, np.ndarray]:
    """Value and gradient of G_eps(lam) = b^T lam - eps * sum_i x_i(lam).

    The gradient b - A x(lam) is the primal feasibility residual. When the
    exponent clamp fires the value is the -inf sentinel; the gradient is still
    computed from the clamped point.
    """
    exponent, overflow = _clamped_exponent(inst, lam, epsilon, exp_clamp)
    point = np.exp(exponent)
    gradient = inst.rhs - inst.con_matrix @ point
    if overflow:
        return -math.inf, gradient
    multipliers = np.asarray(lam, dtype=np.float64)
    value = float(inst.rhs @ multipliers - epsilon * np.sum(point))
    return value, gradient


@dataclass(frozen=True, slots=True, eq=False)
class BarrierDual:
    value: float
    point: np.ndarray


@dataclass(frozen=True, slots=True)
class DomainViolation:
    min_slack: float
    violated: tuple[int, ...]


def log_barrier_dual_eval(inst: LpInstance, lam, mu: float) -> BarrierDual | DomainViolation:
    """Dual function of the log-barrier problem, defined only where A^T lam < c."""
    if not mu > 0.0:
        raise ValueError(f"mu must be positive, got {mu!r}")
    multipliers = check_length(lam, inst.num_cons, "lambda")
    slack = inst.cost - inst.con_matrix.T @ multipliers
    if np.any(slack <= 0.0):
        violated = tuple(int(i) for i in np.flatnonzero(slack <= 0.0))
        return DomainViolation(min_slack=float(np.min(slack)), violated=violated)

    point = mu / slack
    value = float(
        inst.rhs @ multipliers
        + inst.num_vars * mu * (1.0 - math.log(mu))
        + mu * np.sum(np.log(slack))
    )
    return BarrierDual(value=value, point=point)
