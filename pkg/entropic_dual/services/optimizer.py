from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import linalg

from entropic_dual.services.core import (
    DEFAULT_LP_GRAD_TOL,
    DEFAULT_SDP_GRAD_TOL,
    ConfigError,
    LpInstance,
    SdpInstance,
    SolveReport,
    SolverConfig,
    TraceEntry,
    lp_primal_objective,
    sdp_primal_objective,
)
from entropic_dual.services.lp_dual import lp_dual_eval, lp_primal_point
from entropic_dual.services.sdp_dual import adjoint_map, sdp_dual_eval, sdp_primal_point

LOGGER = logging.getLogger(__name__)

DualOracle = Callable[[np.ndarray], tuple[float, np.ndarray]]
# Largest admissible step length along a direction from a point.
StepLimit = Callable[[np.ndarray, np.ndarray], float]

# Relative noise level under which two objective values are indistinguishable.
VALUE_NOISE = 16.0 * np.finfo(float).eps
# Minimum cosine between s and y for a curvature pair to enter the memory.
_CURVATURE_COSINE = 1e-10
# How far one trial step may raise the largest primal exponent.
EXPONENT_RISE = 20.0


class NonFiniteStartError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Schedule:
    eps_start: float = 1.0
    ratio: float = 0.5
    num_steps: int = 8

    def __post_init__(self) -> None:
        if not math.isfinite(self.eps_start) or self.eps_start <= 0.0:
            raise ConfigError(f"schedule start must be positive, got {self.eps_start!r}")
        if not 0.0 < self.ratio < 1.0:
            raise ConfigError(f"schedule ratio must lie in (0, 1), got {self.ratio!r}")
        if self.num_steps < 1:
            raise ConfigError(f"schedule needs at least one step, got {self.num_steps!r}")

    @classmethod
    def parse(cls, text: str) -> Schedule:
        parts = [chunk.strip() for chunk in text.split(",")]
        if len(parts) != 3:
            raise ConfigError(f"schedule must look like 'start,ratio,steps', got {text!r}")
        try:
            return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise ConfigError(f"invalid schedule {text!r}: {exc}") from exc

    def epsilons(self) -> list[float]:
        return [self.eps_start * self.ratio**k for k in range(self.num_steps)]


@dataclass(frozen=True, slots=True, eq=False)
class AscentResult:
    point: np.ndarray
    value: float
    gradient: np.ndarray
    iterations: int
    converged: bool
    trace: tuple[TraceEntry, ...]
    message: str


@dataclass(slots=True)
class _LinePoint:
    alpha: float
    f: float
    df: float
    gradient: np.ndarray | None


def _cubic_interpolate(lo: _LinePoint, hi: _LinePoint) -> float:
    # Minimizer of the cubic through two points with slopes, kept inside the bracket.
    x1, f1, g1 = lo.alpha, lo.f, lo.df
    x2, f2, g2 = hi.alpha, hi.f, hi.df
    xmin_bound, xmax_bound = (x1, x2) if x1 <= x2 else (x2, x1)
    if not (math.isfinite(f2) and math.isfinite(g2)) or x1 == x2:
        return x1 + 0.1 * (x2 - x1)
    d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2)
    d2_square = d1 * d1 - g1 * g2
    if d2_square < 0.0:
        return 0.5 * (xmin_bound + xmax_bound)
    d2 = math.sqrt(d2_square)
    if x1 <= x2:
        denom = g2 - g1 + 2.0 * d2
        min_pos = x2 - (x2 - x1) * ((g2 + d2 - d1) / denom) if denom != 0.0 else 0.5 * (x1 + x2)
    else:
        denom = g1 - g2 + 2.0 * d2
        min_pos = x1 - (x1 - x2) * ((g1 + d2 - d1) / denom) if denom != 0.0 else 0.5 * (x1 + x2)
    if not math.isfinite(min_pos):
        return 0.5 * (xmin_bound + xmax_bound)
    return min(max(min_pos, xmin_bound), xmax_bound)


def _strong_wolfe(
    line: Callable[[float], _LinePoint],
    f0: float,
    df0: float,
    alpha: float,
    c1: float,
    c2: float,
    max_evals: int,
    max_alpha: float = math.inf,
) -> tuple[_LinePoint | None, int]:
    """Bracketing and zoom search on phi(alpha) = f(x + alpha d), minimizing.

    Expansion never goes past max_alpha; a step reaching it with sufficient
    decrease is accepted as is. Returns the accepted point, or None when no
    step with sufficient decrease was found within max_evals evaluations.
    """
    noise = VALUE_NOISE * (1.0 + abs(f0))

    def decreased(point: _LinePoint) -> bool:
        if not math.isfinite(point.f):
            return False
        if point.f <= f0 + c1 * point.alpha * df0:
            return True
        # Approximate Wolfe: values agree within round-off, slope still trustworthy.
        return point.f <= f0 + noise and point.df <= (2.0 * c1 - 1.0) * df0

    def curvature_ok(point: _LinePoint) -> bool:
        return abs(point.df) <= -c2 * df0

    prev = _LinePoint(0.0, f0, df0, None)
    evals = 0
    lo = hi = None
    while evals < max_evals:
        current = line(alpha)
        evals += 1
        if not decreased(current) or (evals > 1 and current.f >= prev.f and prev.alpha > 0.0):
            lo, hi = prev, current
            break
        if curvature_ok(current):
            return current, evals
        if current.df >= 0.0:
            lo, hi = current, prev
            break
        if current.alpha >= max_alpha:
            return current, evals
        next_alpha = _cubic_interpolate(
            prev,
            _LinePoint(current.alpha, current.f, current.df, None),
        )
        min_step = current.alpha + 0.01 * (current.alpha - prev.alpha)
        max_step = current.alpha * 10.0
        prev = current
        alpha = min(max(next_alpha, min_step), max_step, max_alpha)
    else:
        return (prev if prev.alpha > 0.0 else None), evals

    insufficient = False
    while evals < max_evals:
        width = abs(hi.alpha - lo.alpha)
        if width <= 1e-16 * max(abs(lo.alpha), abs(hi.alpha)):
            break
        if not math.isfinite(hi.f):
            trial = lo.alpha + 0.1 * (hi.alpha - lo.alpha)
        else:
            trial = _cubic_interpolate(lo, hi)
            low_end, high_end = min(lo.alpha, hi.alpha), max(lo.alpha, hi.alpha)
            margin = 0.1 * (high_end - low_end)
            if min(high_end - trial, trial - low_end) < margin:
                if insufficient or trial >= high_end or trial <= low_end:
                    trial = high_end - margin if abs(trial - high_end) < abs(trial - low_end) else low_end + margin
                    insufficient = False
                else:
                    insufficient = True
            else:
                insufficient = False

        current = line(trial)
        evals += 1
        if not decreased(current) or current.f >= lo.f:
            hi = current
            continue
        if curvature_ok(current):
            return current, evals
        if current.df * (hi.alpha - lo.alpha) >= 0.0:
            hi = lo
        lo = current

    if lo.alpha > 0.0:
        return lo, evals
    return None, evals


def _two_loop(gradient: np.ndarray, steps: deque, changes: deque) -> np.ndarray:
    direction = gradient.copy()
    alphas = []
    for s, y in zip(reversed(steps), reversed(changes)):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ direction)
        direction -= a * y
        alphas.append((rho, a))
    if steps:
        s, y = steps[-1], changes[-1]
        direction *= float(s @ y) / float(y @ y)
    for (s, y), (rho, a) in zip(zip(steps, changes), reversed(alphas)):
        b = rho * float(y @ direction)
        direction += (a - b) * s
    return direction


def maximize_concave(
    evaluate: DualOracle,
    lam0,
    config: SolverConfig,
    step_limit: StepLimit | None = None,
) -> AscentResult:
    """L-BFGS ascent with a strong-Wolfe line search.

    `evaluate` maps a point to (value, gradient); a value of -inf marks points
    outside the numerically representable region and is rejected by the line
    search. `step_limit`, when given, bounds every trial step length so the
    search stays inside the region where `evaluate` is finite.

    Accepted values never decrease by more than VALUE_NOISE * (1 + |value|):
    the approximate Wolfe test accepts steps whose change is round-off.
    """
    grad_tol = config.grad_tol if config.grad_tol is not None else DEFAULT_LP_GRAD_TOL
    lam = np.array(lam0, dtype=np.float64)
    value, gradient = evaluate(lam)
    if not math.isfinite(value):
        raise NonFiniteStartError(f"dual value at the start point is {value!r}")
    gradient = np.asarray(gradient, dtype=np.float64)

    steps: deque = deque(maxlen=config.lbfgs_memory)
    changes: deque = deque(maxlen=config.lbfgs_memory)
    grad_norm = float(np.max(np.abs(gradient), initial=0.0))
    trace = [TraceEntry(0, value, grad_norm)]
    iterations = 0
    converged = grad_norm <= grad_tol
    message = "gradient tolerance reached" if converged else ""

    while not converged and iterations < config.max_iter:
        direction = _two_loop(gradient, steps, changes)
        slope = float(gradient @ direction)
        if not slope > 0.0:
            LOGGER.debug("Curvature memory reset at iteration %d", iterations)
            steps.clear()
            changes.clear()
            direction = gradient.copy()
            slope = float(gradient @ direction)

        if steps:
            alpha0 = 1.0
        else:
            alpha0 = min(1.0, 1.0 / max(float(np.sum(np.abs(gradient))), 1e-300))
        max_alpha = step_limit(lam, direction) if step_limit is not None else math.inf
        alpha0 = min(alpha0, max_alpha)

        base = lam

        def line(alpha: float) -> _LinePoint:
            trial_value, trial_grad = evaluate(base + alpha * direction)
            trial_grad = np.asarray(trial_grad, dtype=np.float64)
            if not math.isfinite(trial_value):
                return _LinePoint(alpha, math.inf, math.nan, trial_grad)
            return _LinePoint(alpha, -trial_value, -float(trial_grad @ direction), trial_grad)

        accepted, evals = _strong_wolfe(
            line,
            -value,
            -slope,
            alpha0,
            config.wolfe_c1,
            config.wolfe_c2,
            config.max_linesearch,
            max_alpha,
        )
        if accepted is None:
            message = f"line search failed after {evals} trial steps"
            LOGGER.warning("Ascent stopped at iteration %d: %s (|grad|=%.3e)", iterations, message, grad_norm)
            break

        step = accepted.alpha * direction
        new_gradient = accepted.gradient
        change = gradient - new_gradient
        curvature = float(step @ change)
        if curvature > _CURVATURE_COSINE * float(np.linalg.norm(step) * np.linalg.norm(change)):
            steps.append(step)
            changes.append(change)

        lam = base + step
        value = -accepted.f
        gradient = new_gradient
        iterations += 1
        grad_norm = float(np.max(np.abs(gradient), initial=0.0))
        trace.append(TraceEntry(iterations, value, grad_norm))
        LOGGER.debug(
            "iter=%d value=%.12g |grad|=%.3e step=%.3e evals=%d",
            iterations,
            value,
            grad_norm,
            accepted.alpha,
            evals,
        )
        converged = grad_norm <= grad_tol
        if converged:
            message = "gradient tolerance reached"

    if not converged and not message:
        message = f"iteration limit {config.max_iter} reached"
    return AscentResult(
        point=lam,
        value=value,
        gradient=gradient,
        iterations=iterations,
        converged=converged,
        trace=tuple(trace),
        message=message,
    )


def _log_report(report: SolveReport) -> None:
    log = LOGGER.info if report.converged else LOGGER.warning
    log(
        "%s solve eps=%g: dual=%.10g primal=%.10g |grad|=%.3e iterations=%d converged=%s",
        report.kind.upper(),
        report.epsilon,
        report.dual_value,
        report.primal_value,
        report.grad_inf_norm,
        report.iterations,
        report.converged,
    )


def _lp_step_limit(inst: LpInstance, eps: float, exp_clamp: float) -> StepLimit:
    transposed = inst.con_matrix.T

    def limit(lam: np.ndarray, direction: np.ndarray) -> float:
        exponent = (transposed @ lam - inst.cost) / eps - 1.0
        rate = (transposed @ direction) / eps
        rising = rate > 0.0
        if not np.any(rising):
            return math.inf
        ceiling = min(max(float(np.max(exponent)), 0.0) + EXPONENT_RISE, exp_clamp)
        bound = float(np.min((ceiling - exponent[rising]) / rate[rising]))
        return bound if bound > 0.0 else math.inf

    return limit


def _top_eigenvalue(matrix: np.ndarray) -> float:
    n = matrix.shape[0]
    return float(linalg.eigvalsh(matrix, subset_by_index=[n - 1, n - 1])[0])


def _sdp_step_limit(inst: SdpInstance, eps: float, exp_clamp: float) -> StepLimit:
    def limit(lam: np.ndarray, direction: np.ndarray) -> float:
        # lambda_max(G + a D) <= lambda_max(G) + a lambda_max(D)
        top = _top_eigenvalue((adjoint_map(inst, lam) - inst.cost.entries) / eps) - 1.0
        rate = _top_eigenvalue(adjoint_map(inst, direction) / eps)
        if not rate > 0.0:
            return math.inf
        ceiling = min(max(top, 0.0) + EXPONENT_RISE, exp_clamp)
        bound = (ceiling - top) / rate
        return bound if bound > 0.0 else math.inf

    return limit


def _no_finite_start(eps: float) -> NonFiniteStartError:
    return NonFiniteStartError(
        f"dual value is -inf at zero and at the shifted start for eps={eps:g}; use a larger epsilon or rescale the cost"
    )


def lp_start(inst: LpInstance, eps: float, exp_clamp: float) -> np.ndarray:
    """Zero when G(0) is finite, else a least-squares fit of A^T lam = c - eps shifted so every exponent is <= -1."""
    zero = np.zeros(inst.num_cons)
    if math.isfinite(lp_dual_eval(inst, zero, eps, exp_clamp)[0]):
        return zero
    transposed = inst.con_matrix.T
    lam = linalg.lstsq(transposed, inst.cost - eps)[0]
    shift = linalg.lstsq(transposed, -np.ones(inst.num_vars))[0]
    excess = float(np.max(transposed @ lam - inst.cost))
    descent = float(np.max(transposed @ shift))
    if excess > 0.0 and descent < 0.0:
        lam = lam + (excess / -descent) * shift
    if not math.isfinite(lp_dual_eval(inst, lam, eps, exp_clamp)[0]):
        raise _no_finite_start(eps)
    LOGGER.info("Dual value overflows at zero for eps=%g, starting from a shifted point", eps)
    return lam


def sdp_start(inst: SdpInstance, eps: float, exp_clamp: float) -> np.ndarray:
    """Zero when G(0) is finite, else a least-squares fit of A* lam = C - eps I shifted below the overflow region."""
    zero = np.zeros(inst.num_cons)
    if math.isfinite(sdp_dual_eval(inst, zero, eps, exp_clamp)[0]):
        return zero
    n = inst.dim
    basis = inst.stacked.reshape(inst.num_cons, n * n).T
    eye = np.eye(n)
    lam = linalg.lstsq(basis, (inst.cost.entries - eps * eye).ravel())[0]
    shift = linalg.lstsq(basis, -eye.ravel())[0]
    excess = _top_eigenvalue(adjoint_map(inst, lam) - inst.cost.entries)
    descent = _top_eigenvalue(adjoint_map(inst, shift))
    if excess > 0.0 and descent < 0.0:
        lam = lam + (excess / -descent) * shift
    if not math.isfinite(sdp_dual_eval(inst, lam, eps, exp_clamp)[0]):
        raise _no_finite_start(eps)
    LOGGER.info("Dual value overflows at zero for eps=%g, starting from a shifted point", eps)
    return lam


def solve_lp(inst: LpInstance, config: SolverConfig, lam0=None) -> SolveReport:
    cfg = config.resolved(DEFAULT_LP_GRAD_TOL)
    eps = cfg.epsilon

    def evaluate(lam: np.ndarray) -> tuple[float, np.ndarray]:
        return lp_dual_eval(inst, lam, eps, cfg.exp_clamp)

    start = lp_start(inst, eps, cfg.exp_clamp) if lam0 is None else np.asarray(lam0, dtype=np.float64)
    ascent = maximize_concave(evaluate, start, cfg, _lp_step_limit(inst, eps, cfg.exp_clamp))
    point = lp_primal_point(inst, ascent.point, eps, cfg.exp_clamp)
    report = SolveReport(
        kind="lp",
        epsilon=eps,
        dual_opt=ascent.point,
        primal_point=point,
        dual_value=ascent.value,
        primal_value=lp_primal_objective(inst, point, eps),
        grad_inf_norm=float(np.max(np.abs(ascent.gradient))),
        iterations=ascent.iterations,
        converged=ascent.converged,
        trace=ascent.trace,
        message=ascent.message,
    )
    _log_report(report)
    return report


def solve_sdp(inst: SdpInstance, config: SolverConfig, lam0=None) -> SolveReport:
    cfg = config.resolved(DEFAULT_SDP_GRAD_TOL)
    eps = cfg.epsilon

    def evaluate(lam: np.ndarray) -> tuple[float, np.ndarray]:
        return sdp_dual_eval(inst, lam, eps, cfg.exp_clamp)

    start = sdp_start(inst, eps, cfg.exp_clamp) if lam0 is None else np.asarray(lam0, dtype=np.float64)
    ascent = maximize_concave(evaluate, start, cfg, _sdp_step_limit(inst, eps, cfg.exp_clamp))
    X = sdp_primal_point(inst, ascent.point, eps, cfg.exp_clamp)
    report = SolveReport(
        kind="sdp",
        epsilon=eps,
        dual_opt=ascent.point,
        primal_point=X,
        dual_value=ascent.value,
        primal_value=sdp_primal_objective(inst, X, eps),
        grad_inf_norm=float(np.max(np.abs(ascent.gradient))),
        iterations=ascent.iterations,
        converged=ascent.converged,
        trace=ascent.trace,
        message=ascent.message,
    )
    _log_report(report)
    return report


def solve(inst: LpInstance | SdpInstance, config: SolverConfig, lam0=None) -> SolveReport:
    if isinstance(inst, SdpInstance):
        return solve_sdp(inst, config, lam0)
    return solve_lp(inst, config, lam0)


def _unstarted_report(inst: LpInstance | SdpInstance, config: SolverConfig, message: str) -> SolveReport:
    zero = np.zeros(inst.num_cons)
    if isinstance(inst, SdpInstance):
        kind = "sdp"
        point = sdp_primal_point(inst, zero, config.epsilon, config.exp_clamp)
        primal_value = sdp_primal_objective(inst, point, config.epsilon)
    else:
        kind = "lp"
        point = lp_primal_point(inst, zero, config.epsilon, config.exp_clamp)
        primal_value = lp_primal_objective(inst, point, config.epsilon)
    return SolveReport(
        kind=kind,
        epsilon=config.epsilon,
        dual_opt=zero,
        primal_point=point,
        dual_value=-math.inf,
        primal_value=primal_value,
        grad_inf_norm=math.inf,
        iterations=0,
        converged=False,
        message=message,
    )


def solve_continuation(
    inst: LpInstance | SdpInstance,
    schedule: Schedule,
    config: SolverConfig,
) -> list[SolveReport]:
    """Solve along eps_k = start * ratio^k, warm-starting each step from the previous multipliers.

    A step that cannot start is recorded as a non-converged report with no
    iterations and the next step starts cold.
    """
    reports: list[SolveReport] = []
    warm: np.ndarray | None = None
    for eps in schedule.epsilons():
        step_config = replace(config, epsilon=eps)
        try:
            try:
                report = solve(inst, step_config, warm)
            except NonFiniteStartError:
                if warm is None:
                    raise
                LOGGER.warning("Warm start is not finite at eps=%g, restarting cold", eps)
                report = solve(inst, step_config)
        except NonFiniteStartError as exc:
            LOGGER.warning("Continuation step eps=%g cannot start: %s", eps, exc)
            report = _unstarted_report(inst, step_config, str(exc))
        reports.append(report)
        if report.converged:
            warm = report.dual_opt
        else:
            if report.iterations:
                LOGGER.warning("Continuation step eps=%g did not converge: %s", eps, report.message)
            warm = None
    return reports
