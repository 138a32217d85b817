from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import xlogy

from entropic_dual.services.core import LpInstance, OtInstance, SolveReport, SolverConfig, check_length
from entropic_dual.services.optimizer import solve_lp

LOGGER = logging.getLogger(__name__)

SINKHORN_MIN_EPSILON = 0.005


class SinkhornUnderflowError(ArithmeticError):
    pass


@dataclass(frozen=True, slots=True)
class PlanShape:
    """How an LP vector maps back onto a transport plan."""

    rows: int
    cols: int
    dropped_column: int

    def to_plan(self, x) -> np.ndarray:
        vector = check_length(x, self.rows * self.cols, "x")
        return vector.reshape(self.rows, self.cols).copy()


def ot_to_lp(ot: OtInstance) -> tuple[LpInstance, PlanShape]:
    n1, n2 = ot.rows, ot.cols
    row_sums = np.kron(np.eye(n1), np.ones((1, n2)))
    col_sums = np.kron(np.ones((1, n1)), np.eye(n2))
    # The last column sum follows from the others and total mass 1.
    matrix = np.vstack([row_sums, col_sums[: n2 - 1]])
    rhs = np.concatenate([ot.source, ot.target[: n2 - 1]])
    inst = LpInstance(cost=ot.cost.ravel(), con_matrix=matrix, rhs=rhs)
    return inst, PlanShape(rows=n1, cols=n2, dropped_column=n2 - 1)


def marginal_residuals(plan, ot: OtInstance) -> tuple[float, float]:
    """L-inf residuals of the row and column marginals, all columns included."""
    matrix = np.asarray(plan, dtype=np.float64)
    row_err = float(np.max(np.abs(matrix.sum(axis=1) - ot.source)))
    col_err = float(np.max(np.abs(matrix.sum(axis=0) - ot.target)))
    return row_err, col_err


def regularized_ot_value(plan: np.ndarray, ot: OtInstance, epsilon: float) -> float:
    return float(np.sum(plan * ot.cost) + epsilon * np.sum(xlogy(plan, plan)))


@dataclass(frozen=True, slots=True, eq=False)
class SinkhornResult:
    plan: np.ndarray
    value: float
    iterations: int
    converged: bool
    marginal_error: float


def sinkhorn(
    ot: OtInstance,
    epsilon: float,
    tol: float = 1e-9,
    max_iter: int = 20000,
) -> SinkhornResult:
    """Matrix scaling u <- p / (K v), v <- q / (K^T u) with K = exp(-C / eps).

    Runs in the plain domain; below about eps = 0.005 relative to the cost
    range the kernel underflows and SinkhornUnderflowError is raised.
    """
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    if not tol > 0.0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be positive, got {max_iter!r}")

    p, q = ot.source, ot.target
    K = np.exp(-ot.cost / epsilon)
    if np.any(K.sum(axis=1) == 0.0) or np.any(K.sum(axis=0) == 0.0):
        raise SinkhornUnderflowError(
            f"kernel exp(-C/eps) underflows at eps={epsilon:g}; "
            f"use a larger epsilon (>= {SINKHORN_MIN_EPSILON:g} times the cost range)"
        )

    u = np.full(ot.rows, 1.0 / ot.rows)
    v = np.full(ot.cols, 1.0 / ot.cols)
    error = np.inf
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        Kv = K @ v
        u = p / Kv
        KTu = K.T @ u
        v = q / KTu
        if (
            np.any(Kv == 0.0)
            or np.any(KTu == 0.0)
            or not np.all(np.isfinite(u))
            or not np.all(np.isfinite(v))
        ):
            raise SinkhornUnderflowError(
                f"scaling vectors became non-finite at iteration {iterations}; use a larger epsilon than {epsilon:g}"
            )
        # After the v update the columns match exactly; the rows carry the error.
        plan = u[:, None] * K * v[None, :]
        row_err = float(np.sum(np.abs(plan.sum(axis=1) - p)))
        col_err = float(np.sum(np.abs(plan.sum(axis=0) - q)))
        error = max(row_err, col_err)
        if iterations % 100 == 0:
            LOGGER.debug("sinkhorn iter=%d marginal error=%.3e", iterations, error)
        if error <= tol:
            converged = True
            break

    plan = u[:, None] * K * v[None, :]
    if not converged:
        LOGGER.warning("Sinkhorn stopped after %d iterations with marginal error %.3e", iterations, error)
    return SinkhornResult(
        plan=plan,
        value=regularized_ot_value(plan, ot, epsilon),
        iterations=iterations,
        converged=converged,
        marginal_error=error,
    )


@dataclass(frozen=True, slots=True, eq=False)
class OtComparison:
    epsilon: float
    sinkhorn: SinkhornResult
    dual: SolveReport
    dual_plan: np.ndarray
    sinkhorn_seconds: float
    dual_seconds: float

    @property
    def sinkhorn_value(self) -> float:
        return self.sinkhorn.value

    @property
    def dual_value(self) -> float:
        return self.dual.dual_value

    @property
    def value_gap(self) -> float:
        return abs(self.sinkhorn.value - self.dual.dual_value)

    @property
    def plan_l1(self) -> float:
        return float(np.sum(np.abs(self.sinkhorn.plan - self.dual_plan)))


def compare_ot(ot: OtInstance, epsilon: float, config: SolverConfig, tol: float = 1e-9) -> OtComparison:
    started = time.perf_counter()
    sink = sinkhorn(ot, epsilon, tol=tol)
    sinkhorn_seconds = time.perf_counter() - started

    lp, shape = ot_to_lp(ot)
    started = time.perf_counter()
    report = solve_lp(lp, replace(config, epsilon=epsilon))
    dual_seconds = time.perf_counter() - started

    comparison = OtComparison(
        epsilon=epsilon,
        sinkhorn=sink,
        dual=report,
        dual_plan=shape.to_plan(report.primal_array()),
        sinkhorn_seconds=sinkhorn_seconds,
        dual_seconds=dual_seconds,
    )
    LOGGER.info(
        "OT comparison eps=%g: sinkhorn=%.10g dual=%.10g gap=%.3e plan_l1=%.3e",
        epsilon,
        comparison.sinkhorn_value,
        comparison.dual_value,
        comparison.value_gap,
        comparison.plan_l1,
    )
    return comparison
