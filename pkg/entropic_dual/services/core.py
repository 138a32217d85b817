from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import linalg
from scipy.special import xlogy

RANK_RTOL = 1e-10
SYMMETRY_RTOL = 1e-12
MARGINAL_ATOL = 1e-12
MIN_EPSILON = 1e-9
DEFAULT_EXP_CLAMP = 700.0
DEFAULT_LP_GRAD_TOL = 1e-8
DEFAULT_SDP_GRAD_TOL = 1e-6


class InstanceError(ValueError):
    pass


class DimensionError(InstanceError):
    pass


class ConfigError(ValueError):
    pass


def _float_array(values, name: str, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise InstanceError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InstanceError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InstanceError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def check_length(values, expected: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (expected,):
        raise DimensionError(f"{name} must have length {expected}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, slots=True, eq=False)
class SymMatrix:
    """Dense real symmetric matrix; construction averages M and M^T."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        raw = _float_array(self.entries, "matrix", 2)
        if raw.shape[0] != raw.shape[1]:
            raise InstanceError(f"matrix must be square, got shape {raw.shape}")
        sym = 0.5 * (raw + raw.T)
        sym.setflags(write=False)
        object.__setattr__(self, "entries", sym)

    @classmethod
    def from_array(cls, values, strict: bool = False) -> SymMatrix:
        if isinstance(values, SymMatrix):
            return values
        if strict:
            raw = np.asarray(values, dtype=np.float64)
            if raw.ndim == 2 and raw.shape[0] == raw.shape[1] and np.all(np.isfinite(raw)):
                scale = max(1.0, float(np.max(np.abs(raw), initial=0.0)))
                asym = float(np.max(np.abs(raw - raw.T), initial=0.0))
                if asym > SYMMETRY_RTOL * scale:
                    raise InstanceError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
        return cls(values)

    @classmethod
    def identity(cls, n: int) -> SymMatrix:
        return cls(np.eye(n))

    @classmethod
    def diag(cls, values) -> SymMatrix:
        return cls(np.diag(np.asarray(values, dtype=np.float64)))

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def to_array(self) -> np.ndarray:
        return np.array(self.entries)


@dataclass(frozen=True, slots=True, eq=False)
class LpInstance:
    """Standard-form LP  min c^T x  s.t.  A x = b, x >= 0."""

    cost: np.ndarray
    con_matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self) -> None:
        cost = _float_array(self.cost, "cost", 1)
        matrix = _float_array(self.con_matrix, "constraint matrix", 2)
        rhs = _float_array(self.rhs, "rhs", 1)
        m, d = matrix.shape
        if cost.shape != (d,):
            raise InstanceError(f"cost has length {cost.size}, constraint matrix has {d} columns")
        if rhs.shape != (m,):
            raise InstanceError(f"rhs has length {rhs.size}, constraint matrix has {m} rows")
        if m > d:
            raise InstanceError(f"standard form needs m <= d, got m={m}, d={d}")
        singular = linalg.svdvals(matrix)
        if singular[-1] <= RANK_RTOL * singular[0]:
            raise InstanceError(
                f"constraint matrix is not full row rank (singular values {singular[-1]:.3e} / {singular[0]:.3e})"
            )
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "con_matrix", matrix)
        object.__setattr__(self, "rhs", rhs)

    @property
    def num_vars(self) -> int:
        return int(self.con_matrix.shape[1])

    @property
    def num_cons(self) -> int:
        return int(self.con_matrix.shape[0])


@dataclass(frozen=True, slots=True, eq=False)
class SdpInstance:
    """Standard-form SDP  min Tr(C X)  s.t.  Tr(A_k X) = b_k, X PSD."""

    cost: SymMatrix
    con_matrices: tuple[SymMatrix, ...]
    rhs: np.ndarray
    stacked: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        cost = SymMatrix.from_array(self.cost, strict=True)
        matrices = tuple(SymMatrix.from_array(a, strict=True) for a in self.con_matrices)
        rhs = _float_array(self.rhs, "rhs", 1)
        n = cost.n
        m = len(matrices)
        if m == 0:
            raise InstanceError("at least one constraint matrix is required")
        if any(a.n != n for a in matrices):
            raise InstanceError(f"every constraint matrix must be {n}x{n}")
        if rhs.shape != (m,):
            raise InstanceError(f"rhs has length {rhs.size}, expected {m}")
        if m > n * (n + 1) // 2:
            raise InstanceError(f"m={m} exceeds dim of S^{n} ({n * (n + 1) // 2})")
        stacked = np.stack([a.entries for a in matrices])
        vectors = stacked.reshape(m, n * n)
        gram_eigs = linalg.eigvalsh(vectors @ vectors.T)
        if gram_eigs[-1] <= 0.0 or gram_eigs[0] <= RANK_RTOL * gram_eigs[-1]:
            raise InstanceError("constraint matrices are not linearly independent")
        stacked.setflags(write=False)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "con_matrices", matrices)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "stacked", stacked)

    @property
    def dim(self) -> int:
        return self.cost.n

    @property
    def num_cons(self) -> int:
        return len(self.con_matrices)


@dataclass(frozen=True, slots=True, eq=False)
class OtInstance:
    """Discrete transport problem between marginals p (rows) and q (columns)."""

    cost: np.ndarray
    source: np.ndarray
    target: np.ndarray

    def __post_init__(self) -> None:
        cost = _float_array(self.cost, "cost matrix", 2)
        source = _float_array(self.source, "source marginal", 1)
        target = _float_array(self.target, "target marginal", 1)
        n1, n2 = cost.shape
        if source.shape != (n1,) or target.shape != (n2,):
            raise InstanceError(
                f"marginal lengths ({source.size}, {target.size}) do not match cost shape {cost.shape}"
            )
        for name, marginal in (("source", source), ("target", target)):
            if np.any(marginal <= 0.0):
                raise InstanceError(f"{name} marginal must be strictly positive")
            if abs(float(np.sum(marginal)) - 1.0) > MARGINAL_ATOL:
                raise InstanceError(f"{name} marginal must sum to 1, got {float(np.sum(marginal))!r}")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target", target)

    @property
    def rows(self) -> int:
        return int(self.cost.shape[0])

    @property
    def cols(self) -> int:
        return int(self.cost.shape[1])


@dataclass(frozen=True, slots=True)
class SolverConfig:
    epsilon: float = 0.01
    grad_tol: float | None = None
    max_iter: int = 500
    lbfgs_memory: int = 10
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    exp_clamp: float = DEFAULT_EXP_CLAMP
    max_linesearch: int = 50

    def __post_init__(self) -> None:
        if not math.isfinite(self.epsilon) or self.epsilon < MIN_EPSILON:
            raise ConfigError(f"epsilon must be a finite number >= {MIN_EPSILON:g}, got {self.epsilon!r}")
        if self.grad_tol is not None and not self.grad_tol > 0.0:
            raise ConfigError(f"grad_tol must be positive, got {self.grad_tol!r}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be positive, got {self.max_iter!r}")
        if self.lbfgs_memory < 1:
            raise ConfigError(f"lbfgs_memory must be positive, got {self.lbfgs_memory!r}")
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ConfigError(
                f"need 0 < wolfe_c1 < wolfe_c2 < 1, got {self.wolfe_c1!r}, {self.wolfe_c2!r}"
            )
        if not self.exp_clamp > 0.0:
            raise ConfigError(f"exp_clamp must be positive, got {self.exp_clamp!r}")
        if self.max_linesearch < 1:
            raise ConfigError(f"max_linesearch must be positive, got {self.max_linesearch!r}")

    def resolved(self, default_grad_tol: float) -> SolverConfig:
        if self.grad_tol is not None:
            return self
        return replace(self, grad_tol=default_grad_tol)


class TraceEntry(NamedTuple):
    iteration: int
    dual_value: float
    grad_inf_norm: float


@dataclass(frozen=True, slots=True, eq=False)
class SolveReport:
    kind: str
    epsilon: float
    dual_opt: np.ndarray
    primal_point: np.ndarray | SymMatrix
    dual_value: float
    primal_value: float
    grad_inf_norm: float
    iterations: int
    converged: bool
    trace: tuple[TraceEntry, ...] = ()
    message: str = ""

    @property
    def duality_gap(self) -> float:
        return abs(self.dual_value - self.primal_value)

    def primal_array(self) -> np.ndarray:
        if isinstance(self.primal_point, SymMatrix):
            return self.primal_point.to_array()
        return np.array(self.primal_point)


def shannon_entropy(x) -> float:
    values = np.asarray(x, dtype=np.float64)
    if np.any(values < 0.0):
        return math.inf
    return float(np.sum(xlogy(values, values)))


def eig_tolerance(matrix: SymMatrix) -> float:
    return 1e-12 * max(1.0, matrix.frobenius_norm())


def von_neumann_entropy(X: SymMatrix) -> float:
    # Continuous extension: zero eigenvalues contribute 0 ln 0 = 0.
    sigma = linalg.eigvalsh(X.entries)
    tol = eig_tolerance(X)
    if np.any(sigma < -tol):
        return math.inf
    sigma = np.where(sigma <= tol, 0.0, sigma)
    return float(np.sum(xlogy(sigma, sigma)))


def lp_primal_objective(inst: LpInstance, x, epsilon: float) -> float:
    point = check_length(x, inst.num_vars, "x")
    linear = float(inst.cost @ point)
    if epsilon == 0.0:
        return linear if np.all(point >= 0.0) else math.inf
    entropy = shannon_entropy(point)
    if math.isinf(entropy):
        return math.inf
    return linear + epsilon * entropy


def sdp_primal_objective(inst: SdpInstance, X: SymMatrix, epsilon: float) -> float:
    if X.n != inst.dim:
        raise DimensionError(f"X must be {inst.dim}x{inst.dim}, got {X.n}x{X.n}")
    linear = float(np.sum(inst.cost.entries * X.entries))
    if epsilon == 0.0:
        return linear
    entropy = von_neumann_entropy(X)
    if math.isinf(entropy):
        return math.inf
    return linear + epsilon * entropy
