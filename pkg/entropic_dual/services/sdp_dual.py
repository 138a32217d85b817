from __future__ import annotations

import math

import numpy as np
from scipy import linalg

from entropic_dual.services.core import (
    DEFAULT_EXP_CLAMP,
    DimensionError,
    SdpInstance,
    SymMatrix,
    check_length,
)

PSD_RTOL = 1e-10


def sym_eig(M: SymMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Return (Q, sigma) with M = Q diag(sigma) Q^T and sigma ascending."""
    sigma, Q = linalg.eigh(M.entries)
    return Q, sigma


def _spectral_exp(M: SymMatrix, shift: float, exp_clamp: float) -> tuple[SymMatrix, np.ndarray, bool]:
    Q, sigma = sym_eig(M)
    exponent = sigma + shift
    overflow = bool(np.any(exponent > exp_clamp))
    values = np.exp(np.clip(exponent, -exp_clamp, exp_clamp))
    return SymMatrix((Q * values) @ Q.T), values, overflow


def mat_exp_sym(M: SymMatrix, exp_clamp: float = DEFAULT_EXP_CLAMP) -> SymMatrix:
    result, _, _ = _spectral_exp(M, 0.0, exp_clamp)
    return result


def adjoint_map(inst: SdpInstance, lam) -> np.ndarray:
    """sum_k lam_k A_k."""
    multipliers = check_length(lam, inst.num_cons, "lambda")
    return np.tensordot(multipliers, inst.stacked, axes=1)


def constraint_map(inst: SdpInstance, X: SymMatrix) -> np.ndarray:
    """(Tr(A_k X))_k."""
    if X.n != inst.dim:
        raise DimensionError(f"X must be {inst.dim}x{inst.dim}, got {X.n}x{X.n}")
    return np.einsum("kij,ij->k", inst.stacked, X.entries)


def _primal_spectrum(
    inst: SdpInstance,
    lam,
    epsilon: float,
    exp_clamp: float,
) -> tuple[SymMatrix, np.ndarray, bool]:
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    generator = SymMatrix((adjoint_map(inst, lam) - inst.cost.entries) / epsilon)
    return _spectral_exp(generator, -1.0, exp_clamp)


def sdp_primal_point(
    inst: SdpInstance,
    lam,
    epsilon: float,
    exp_clamp: float = DEFAULT_EXP_CLAMP,
) -> SymMatrix:
    """X(lam) = exp((A* lam - C) / eps - I)."""
    X, _, _ = _primal_spectrum(inst, lam, epsilon, exp_clamp)
    return X


def sdp_dual_eval(
    inst: SdpInstance,
    lam,
    epsilon: float,
    exp_clamp: float = DEFAULT_EXP_CLAMP,
) -> tuple[float, np.ndarray]:
    X, spectrum, overflow = _primal_spectrum(inst, lam, epsilon, exp_clamp)
    gradient = inst.rhs - constraint_map(inst, X)
    if overflow:
        return -math.inf, gradient
    multipliers = np.asarray(lam, dtype=np.float64)
    value = float(inst.rhs @ multipliers - epsilon * np.sum(spectrum))
    return value, gradient


def trace_bounds(A: SymMatrix, B: SymMatrix) -> tuple[float, float]:
    """Eigenvalue bounds on Tr(A B) for B PSD: reversed pairing below, same order above."""
    if A.n != B.n:
        raise DimensionError(f"matrices differ in size: {A.n} vs {B.n}")
    sigma_a = linalg.eigvalsh(A.entries)
    sigma_b = linalg.eigvalsh(B.entries)
    scale = max(1.0, B.frobenius_norm())
    if sigma_b[0] < -PSD_RTOL * scale:
        raise ValueError(f"B is not positive semidefinite (min eigenvalue {sigma_b[0]:.3e})")
    lower = float(sigma_a @ sigma_b[::-1])
    upper = float(sigma_a @ sigma_b)
    return lower, upper
