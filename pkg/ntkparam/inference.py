from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import structlog

from ntkparam.errors import DivergentKernelError, NumericalError
from ntkparam.kernels.layers import DIVERGENT, NtkValue

log = structlog.get_logger().bind(component="inference")

JITTER_LEVELS = (1e-10, 1e-8, 1e-6)
MAX_EIGEN_N = 4096


@dataclass(frozen=True)
class Predictor:
    """Kernel regression problem: solve (train_kernel + ridge·I) α = targets."""

    train_kernel: NtkValue
    cross_kernel: np.ndarray
    targets: np.ndarray
    ridge: float = 0.0

    def __post_init__(self) -> None:
        if self.ridge < 0:
            raise ValueError("ridge must be ≥ 0")

    def matrix(self) -> np.ndarray:
        if self.train_kernel is DIVERGENT:
            raise DivergentKernelError()
        return np.asarray(self.train_kernel)

    def target_matrix(self) -> np.ndarray:
        targets = np.asarray(self.targets, dtype=np.float64)
        return targets[:, None] if targets.ndim == 1 else targets


@dataclass(frozen=True)
class Fit:
    weights: np.ndarray
    ridge_used: float


def fit(p: Predictor) -> Fit:
    """Cholesky solve, escalating jitter through JITTER_LEVELS·mean(diag) on failure."""
    kernel = p.matrix()
    targets = p.target_matrix()
    n = kernel.shape[0]
    scale = float(np.mean(np.diag(kernel))) if n else 0.0
    attempts = [p.ridge] + [p.ridge + level * scale for level in JITTER_LEVELS]
    for ridge in attempts:
        try:
            factor = scipy.linalg.cho_factor(kernel + ridge * np.eye(n), lower=True)
        except np.linalg.LinAlgError:
            continue
        if ridge != p.ridge:
            log.info("jitter escalated", ridge=p.ridge, ridge_used=ridge)
        return Fit(scipy.linalg.cho_solve(factor, targets), ridge)
    raise NumericalError(
        f"kernel factorization failed after jitter up to {attempts[-1]:.3e}"
    )


def gp_mean(p: Predictor) -> np.ndarray:
    """NNGP posterior mean K*·(K + λI)⁻¹·Y, shape (m, k)."""
    return np.asarray(p.cross_kernel) @ fit(p).weights


def ntk_predict_inf(p: Predictor) -> np.ndarray:
    """t → ∞ mean prediction of gradient-flow training under the NTK."""
    if p.train_kernel is DIVERGENT:
        raise DivergentKernelError()
    return gp_mean(p)


def ntk_predict_time(p: Predictor, t: float, lr: float) -> np.ndarray:
    """Mean prediction after gradient flow for time ``t`` at learning rate ``lr``.

    Θ*·Θ⁻¹·(I − exp(−lr·Θ·t))·Y, evaluated in the eigenbasis of Θ + λI.
    """
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"time must be finite and ≥ 0, got {t}")
    if lr <= 0:
        raise ValueError("lr must be > 0")
    kernel = p.matrix()
    n = kernel.shape[0]
    if n > MAX_EIGEN_N:
        raise NumericalError(f"eigendecomposition capped at n={MAX_EIGEN_N}, got {n}")
    eigvals, eigvecs = scipy.linalg.eigh(kernel + p.ridge * np.eye(n))
    eigvals = np.maximum(eigvals, 0.0)
    rate = lr * t
    positive = eigvals > 0
    safe = np.where(positive, eigvals, 1.0)
    gain = np.where(positive, -np.expm1(-rate * eigvals) / safe, rate)
    weights = eigvecs @ (gain[:, None] * (eigvecs.T @ p.target_matrix()))
    return np.asarray(p.cross_kernel) @ weights


def critical_lr(ntk_train: NtkValue) -> float:
    """2 / λ_max: the largest stable gradient-descent step on the linearized MSE."""
    if ntk_train is DIVERGENT:
        raise DivergentKernelError()
    top = float(scipy.linalg.eigvalsh(np.asarray(ntk_train)).max())
    if top <= 0:
        raise NumericalError("kernel has no positive eigenvalue")
    return 2.0 / top


def classify(predictions: np.ndarray) -> np.ndarray:
    """Argmax decision over one-hot scores; sign decision for a single column."""
    if predictions.shape[1] == 1:
        return (predictions[:, 0] > 0).astype(int)
    return np.argmax(predictions, axis=1)


def classification_error(predictions: np.ndarray, targets: np.ndarray) -> float:
    if predictions.shape[0] == 0:
        return 0.0
    return float(np.mean(classify(predictions) != classify(targets)))


def rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    return float(np.sqrt(np.mean((predictions - targets) ** 2)))
