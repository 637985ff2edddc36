from __future__ import annotations

import numpy as np

from ntkparam.errors import NumericalError

CORRELATION_TOL = 1e-12
VARIANCE_TOL = 1e-8


def variances(kernel: np.ndarray) -> np.ndarray:
    """Per-point (and per-pixel) variances: K[i,i] or K[i,i,p,p]."""
    if kernel.ndim == 2:
        return np.diagonal(kernel).copy()
    return np.einsum("iipp->ip", kernel)


def _norm_products(kernel: np.ndarray) -> np.ndarray:
    var = variances(kernel)
    scale = float(np.max(np.abs(var))) if var.size else 0.0
    if var.size and var.min() < -VARIANCE_TOL * max(scale, 1.0):
        raise NumericalError(f"negative variance {var.min():.3e} in covariance")
    var = np.maximum(var, 0.0)
    if kernel.ndim == 2:
        return np.sqrt(np.outer(var, var))
    return np.sqrt(var[:, None, :, None] * var[None, :, None, :])


def _correlations(kernel: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (sqrt(K_aa K_bb), clamped correlation); correlation is 0 where the product is 0."""
    norms = _norm_products(kernel)
    live = norms > 0
    corr = np.zeros_like(kernel)
    np.divide(kernel, norms, out=corr, where=live)
    overshoot = float(np.max(np.abs(corr))) - 1.0 if corr.size else 0.0
    if overshoot > CORRELATION_TOL:
        raise NumericalError(f"correlation exceeds 1 by {overshoot:.3e}")
    return norms, np.clip(corr, -1.0, 1.0)


def relu_nngp_map(kernel: np.ndarray) -> np.ndarray:
    """Arc-cosine map T(K) = E[relu(u) relu(v)] for (u, v) ~ N(0, K)."""
    norms, corr = _correlations(kernel)
    theta = np.arccos(corr)
    sin_theta = np.sqrt(np.maximum(1.0 - corr * corr, 0.0))
    return norms / (2 * np.pi) * (sin_theta + (np.pi - theta) * corr)


def relu_derivative_map(kernel: np.ndarray) -> np.ndarray:
    """Ṫ(K) = E[step(u) step(v)] = (π − θ) / (2π), zero where a variance vanishes."""
    norms, corr = _correlations(kernel)
    derivative = (np.pi - np.arccos(corr)) / (2 * np.pi)
    return np.where(norms > 0, derivative, 0.0)


def relu_ntk_map(pre_nngp: np.ndarray, ntk: np.ndarray) -> np.ndarray:
    """Θ′ = Ṫ(K_pre) ⊙ Θ, with K_pre the NNGP feeding the activation."""
    if pre_nngp.shape != ntk.shape:
        raise ValueError(f"shape mismatch {pre_nngp.shape} vs {ntk.shape}")
    return relu_derivative_map(pre_nngp) * ntk
