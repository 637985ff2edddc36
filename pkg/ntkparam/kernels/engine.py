from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
import structlog

from ntkparam.errors import ShapeError, SpecError
from ntkparam.kernels.layers import (
    Contribution,
    KernelState,
    conv_step,
    dense_step,
    gap_reduce,
    relu_step,
    vec_reduce,
)
from ntkparam.netspec import LayerKind, NetworkSpec, Parameterization, fan_in_layers
from ntkparam.validation import ensure_valid

log = structlog.get_logger().bind(component="kernels")


@dataclass(frozen=True)
class InputKernel:
    """K⁰: (n, n) for dense inputs, (n, n, P, P) per-pixel products for conv."""

    gram: np.ndarray


@dataclass(frozen=True)
class KernelStats:
    mean_diag: float
    max_diag: float
    min_eig: float
    asymmetry: float

    @property
    def psd_ok(self) -> bool:
        return self.min_eig >= -1e-8 * max(self.max_diag, 0.0)


def _stack_inputs(spec: NetworkSpec, x: np.ndarray, x2: np.ndarray | None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x2 is not None:
        x = np.vstack([x, np.asarray(x2, dtype=np.float64)])
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeError(
            f"inputs have shape {x.shape}, expected (n, {spec.input_dim})"
        )
    return x


def input_kernel(x: np.ndarray, spec: NetworkSpec) -> InputKernel:
    """Normalized input Gram matrix that seeds the layer recursions."""
    x = _stack_inputs(spec, x, None)
    if not spec.is_convolutional:
        gram = x @ x.T / spec.input_dim
        return InputKernel(0.5 * (gram + gram.T))
    channels = spec.input_channels
    pixels = x.reshape(x.shape[0], channels, spec.spatial_size)
    gram = np.einsum("icp,jcq->ijpq", pixels, pixels) / channels
    return InputKernel(0.5 * (gram + gram.transpose(1, 0, 3, 2)))


def _layer_states(spec: NetworkSpec, state: KernelState) -> Iterator[KernelState]:
    """Yield the kernel state after each layer of ``spec``, in order."""
    fan_ins = {fan.layer_index: fan for fan in fan_in_layers(spec)}
    param = spec.parameterization
    for index, layer in enumerate(spec.layers):
        if layer.kind is LayerKind.DENSE:
            state = dense_step(state, fan_ins[index].base, spec.hyper, param)
        elif layer.kind is LayerKind.CONV:
            state = conv_step(
                state, fan_ins[index].base, layer.filter_offsets, spec.hyper, param
            )
        elif layer.kind is LayerKind.RELU:
            state = relu_step(state)
        elif layer.kind is LayerKind.GAP:
            state = gap_reduce(state)
        else:
            state = vec_reduce(state)
        log.debug("layer propagated", layer=index, kind=layer.kind.value)
        yield state


def initial_state(
    spec: NetworkSpec,
    x: np.ndarray,
    x2: np.ndarray | None = None,
    track_contributions: bool = False,
) -> KernelState:
    ensure_valid(spec)
    gram = input_kernel(_stack_inputs(spec, x, x2), spec).gram
    track = track_contributions and spec.parameterization is not Parameterization.NAIVE_STANDARD
    return KernelState(
        nngp=gram,
        ntk=np.zeros_like(gram),
        layer_index=0,
        contributions=() if track else None,
    )


def propagate(
    spec: NetworkSpec,
    x: np.ndarray,
    x2: np.ndarray | None = None,
    track_contributions: bool = False,
) -> KernelState:
    """Readout-level NNGP and NTK over the stacked inputs X ∪ X2.

    Rows and columns follow the stacking order, so the first ``len(x)``
    indices are X. Under naive standard parameterization the NTK is DIVERGENT.
    """
    state = initial_state(spec, x, x2, track_contributions)
    for state in _layer_states(spec, state):
        pass
    log.info(
        "propagated kernels",
        n=state.nngp.shape[0],
        layers=len(spec.layers),
        parameterization=spec.parameterization.value,
        divergent=state.is_divergent,
    )
    return state


def readout_kernel(spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    """NTK contribution of the final affine layer alone."""
    if spec.parameterization is Parameterization.NAIVE_STANDARD:
        raise SpecError("readout kernel is undefined under naive standard parameterization")
    state = initial_state(spec, x)
    states = list(_layer_states(spec, state))
    entering = states[-2] if len(states) > 1 else state
    readout = list(fan_in_layers(spec))[-1]
    if spec.parameterization is Parameterization.NTK:
        return spec.hyper.sigma_w_sq * entering.nngp + spec.hyper.sigma_b_sq
    return readout.base * entering.nngp + 1.0


def decompose(spec: NetworkSpec, x: np.ndarray) -> list[Contribution]:
    """Per-layer (weight_part, bias_part) NTK contributions, input layer first."""
    if spec.parameterization is Parameterization.NAIVE_STANDARD:
        raise SpecError("naive standard parameterization has no finite NTK to decompose")
    state = propagate(spec, x, track_contributions=True)
    return list(state.contributions or ())


def split_blocks(matrix: np.ndarray, n_train: int) -> tuple[np.ndarray, np.ndarray]:
    """(train × train, test × train) blocks of a joint kernel over X ∪ X2."""
    return matrix[:n_train, :n_train], matrix[n_train:, :n_train]


def kernel_stats(matrix: np.ndarray) -> KernelStats:
    diag = np.diagonal(matrix)
    return KernelStats(
        mean_diag=float(diag.mean()),
        max_diag=float(diag.max()),
        min_eig=float(np.linalg.eigvalsh(0.5 * (matrix + matrix.T)).min()),
        asymmetry=float(np.max(np.abs(matrix - matrix.T))),
    )
