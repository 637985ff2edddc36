from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ntkparam.errors import DivergentKernelError, ShapeError
from ntkparam.kernels.relu import relu_derivative_map, relu_nngp_map
from ntkparam.netspec import Hyperparams, Parameterization


class Divergent(Enum):
    """Sticky marker for the naive standard NTK, whose entries grow like s."""

    DIVERGENT = "divergent"

    def __repr__(self) -> str:
        return "DIVERGENT"


DIVERGENT = Divergent.DIVERGENT

NtkValue = np.ndarray | Divergent


class Contribution(NamedTuple):
    """One affine layer's share of the NTK, propagated to the current layer."""

    weight_part: np.ndarray
    bias_part: np.ndarray


@dataclass(frozen=True)
class KernelState:
    nngp: np.ndarray
    ntk: NtkValue
    layer_index: int = 0
    contributions: tuple[Contribution, ...] | None = None

    @property
    def is_spatial(self) -> bool:
        return self.nngp.ndim == 4

    @property
    def is_divergent(self) -> bool:
        return self.ntk is DIVERGENT

    def ntk_matrix(self) -> np.ndarray:
        if self.ntk is DIVERGENT:
            raise DivergentKernelError()
        return self.ntk


def diag_average(tensor: np.ndarray, offsets: Sequence[int]) -> np.ndarray:
    """𝒜⟨T⟩[p, p'] = (1/M) Σ_m T[p+m, p'+m] over the last two axes, circularly."""
    # offset form keeps constants exact
    acc = np.zeros_like(tensor)
    for m in offsets:
        acc += np.roll(tensor, shift=(-m, -m), axis=(-2, -1)) - tensor
    return tensor + acc / len(offsets)


def _affine_step(
    state: KernelState,
    transform: Callable[[np.ndarray], np.ndarray],
    width_factor: float,
    hyper: Hyperparams,
    param: Parameterization,
) -> KernelState:
    k_in = transform(state.nngp)
    nngp = hyper.sigma_w_sq * k_in + hyper.sigma_b_sq
    if param is Parameterization.NAIVE_STANDARD or state.is_divergent:
        return KernelState(nngp, DIVERGENT, state.layer_index + 1)

    if param is Parameterization.NTK:
        weight_part = hyper.sigma_w_sq * k_in
        bias_part = np.full_like(nngp, hyper.sigma_b_sq)
    else:
        weight_part = width_factor * k_in
        bias_part = np.ones_like(nngp)
    ntk = weight_part + bias_part + hyper.sigma_w_sq * transform(state.ntk_matrix())

    contributions = None
    if state.contributions is not None:
        carried = tuple(
            Contribution(
                hyper.sigma_w_sq * transform(c.weight_part),
                hyper.sigma_w_sq * transform(c.bias_part),
            )
            for c in state.contributions
        )
        contributions = carried + (Contribution(weight_part, bias_part),)
    return KernelState(nngp, ntk, state.layer_index + 1, contributions)


def dense_step(
    state: KernelState,
    fan_in: int,
    hyper: Hyperparams,
    param: Parameterization,
) -> KernelState:
    """Fully connected layer: K′ = σ_w²K + σ_b², Θ′ per parameterization."""
    if state.is_spatial:
        raise ShapeError("dense layer needs a reduced (non-spatial) kernel")
    return _affine_step(state, lambda t: t, float(fan_in), hyper, param)


def conv_step(
    state: KernelState,
    fan_in: int,
    offsets: Sequence[int],
    hyper: Hyperparams,
    param: Parameterization,
) -> KernelState:
    """Convolutional layer: the dense recursion with K and Θ passed through 𝒜."""
    if not state.is_spatial:
        raise ShapeError("conv layer needs a spatial (n, n, P, P) kernel")
    offsets = tuple(offsets)
    return _affine_step(
        state,
        lambda t: diag_average(t, offsets),
        float(fan_in * len(offsets)),
        hyper,
        param,
    )


def relu_step(state: KernelState) -> KernelState:
    derivative = relu_derivative_map(state.nngp)
    nngp = relu_nngp_map(state.nngp)
    ntk: NtkValue = DIVERGENT if state.is_divergent else derivative * state.ntk
    contributions = None
    if state.contributions is not None:
        contributions = tuple(
            Contribution(derivative * c.weight_part, derivative * c.bias_part)
            for c in state.contributions
        )
    return KernelState(nngp, ntk, state.layer_index + 1, contributions)


def _reduce(state: KernelState, reduce: Callable[[np.ndarray], np.ndarray]) -> KernelState:
    if not state.is_spatial:
        raise ShapeError("spatial reduction needs a spatial (n, n, P, P) kernel")
    ntk: NtkValue = DIVERGENT if state.is_divergent else reduce(state.ntk)
    contributions = None
    if state.contributions is not None:
        contributions = tuple(
            Contribution(reduce(c.weight_part), reduce(c.bias_part))
            for c in state.contributions
        )
    return KernelState(reduce(state.nngp), ntk, state.layer_index + 1, contributions)


def _spatial_mean(tensor: np.ndarray) -> np.ndarray:
    return tensor.mean(axis=(-2, -1))


def _spatial_trace_mean(tensor: np.ndarray) -> np.ndarray:
    return np.diagonal(tensor, axis1=-2, axis2=-1).mean(axis=-1)


def gap_reduce(state: KernelState) -> KernelState:
    """Global average pooling: K′[i,j] = (1/P²) Σ_{p,p'} K[i,j,p,p']."""
    return _reduce(state, _spatial_mean)


def vec_reduce(state: KernelState) -> KernelState:
    """Vectorized readout: K′[i,j] = (1/P) Σ_p K[i,j,p,p]."""
    return _reduce(state, _spatial_trace_mean)
