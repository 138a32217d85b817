from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize
from scipy.special import xlogy

from entropic_dual.services.core import LpInstance

LOGGER = logging.getLogger(__name__)

MAX_VERTEX_VARS = 25
MAX_BASES = 200_000
MAX_BRUTEFORCE_VARS = 50
VERTEX_TIE_RTOL = 1e-9
FEASIBILITY_ATOL = 1e-8


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True, slots=True, eq=False)
class VertexSolution:
    value: float
    vertices: tuple[np.ndarray, ...]


def lp_vertex_solve(inst: LpInstance) -> VertexSolution:
    """Exact LP optimum by enumerating every basic feasible solution.

    Returns all optimal vertices, so a degenerate optimal face is reported in
    full rather than as one arbitrary vertex.
    """
    d, m = inst.num_vars, inst.num_cons
    if d > MAX_VERTEX_VARS or math.comb(d, m) > MAX_BASES:
        raise OracleError(f"vertex enumeration refused for d={d}, m={m} ({math.comb(d, m)} bases)")

    A, b, c = inst.con_matrix, inst.rhs, inst.cost
    candidates: list[tuple[float, np.ndarray]] = []
    for basis in itertools.combinations(range(d), m):
        columns = A[:, basis]
        singular = linalg.svdvals(columns)
        if singular[-1] <= 1e-12 * singular[0]:
            continue
        basic = linalg.solve(columns, b)
        tol = 1e-9 * (1.0 + float(np.max(np.abs(basic))))
        if np.any(basic < -tol):
            continue
        x = np.zeros(d)
        x[list(basis)] = np.maximum(basic, 0.0)
        candidates.append((float(c @ x), x))

    if not candidates:
        raise OracleError("instance has no nonnegative basic solution (infeasible)")

    best = min(value for value, _ in candidates)
    tie = VERTEX_TIE_RTOL * (1.0 + abs(best))
    vertices: list[np.ndarray] = []
    for value, x in candidates:
        if value - best > tie:
            continue
        if any(np.allclose(x, seen, rtol=0.0, atol=1e-10) for seen in vertices):
            continue
        vertices.append(x)
    LOGGER.debug("vertex oracle: tau=%.12g with %d optimal vertices", best, len(vertices))
    return VertexSolution(value=best, vertices=tuple(vertices))


def _strictly_feasible_start(inst: LpInstance) -> np.ndarray:
    # max t  s.t.  A x = b,  x_i >= t,  t <= 1
    d, m = inst.num_vars, inst.num_cons
    objective = np.zeros(d + 1)
    objective[-1] = -1.0
    a_eq = np.hstack([inst.con_matrix, np.zeros((m, 1))])
    a_ub = np.hstack([-np.eye(d), np.ones((d, 1))])
    bounds = [(0.0, None)] * d + [(None, 1.0)]
    res = optimize.linprog(
        objective,
        A_ub=a_ub,
        b_ub=np.zeros(d),
        A_eq=a_eq,
        b_eq=inst.rhs,
        bounds=bounds,
        method="highs",
    )
    if res.status != 0:
        raise OracleError(f"no feasible starting point: {res.message}")
    x = res.x[:d]
    residual = float(np.max(np.abs(inst.con_matrix @ x - inst.rhs)))
    if res.x[-1] <= 0.0 or residual > FEASIBILITY_ATOL:
        raise OracleError(
            f"no strictly feasible starting point (min coordinate {res.x[-1]:.3e}, residual {residual:.3e})"
        )
    return x


def primal_bruteforce(inst: LpInstance, epsilon: float) -> tuple[float, np.ndarray]:
    """Minimize c^T x + eps * sum x ln x over {A x = b, x >= 0} directly.

    Independent of the dual machinery: SLSQP on the primal, started from the
    most interior point linprog can find.
    """
    if inst.num_vars > MAX_BRUTEFORCE_VARS:
        raise OracleError(f"primal brute force is limited to d <= {MAX_BRUTEFORCE_VARS}, got {inst.num_vars}")
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")

    A, b, c = inst.con_matrix, inst.rhs, inst.cost
    x0 = _strictly_feasible_start(inst)

    def objective(x: np.ndarray) -> float:
        clipped = np.maximum(x, 0.0)
        return float(c @ clipped + epsilon * np.sum(xlogy(clipped, clipped)))

    def gradient(x: np.ndarray) -> np.ndarray:
        return c + epsilon * (np.log(np.maximum(x, 1e-300)) + 1.0)

    res = optimize.minimize(
        objective,
        x0,
        jac=gradient,
        method="SLSQP",
        bounds=[(0.0, None)] * inst.num_vars,
        constraints=[{"type": "eq", "fun": lambda x: A @ x - b, "jac": lambda x: A}],
        options={"ftol": 1e-15, "maxiter": 2000},
    )
    x = np.maximum(res.x, 0.0)
    residual = float(np.max(np.abs(A @ x - b)))
    if residual > FEASIBILITY_ATOL:
        raise OracleError(f"primal brute force ended infeasible (residual {residual:.3e}): {res.message}")
    if not res.success:
        LOGGER.warning("primal brute force: %s", res.message)
    return objective(x), x
