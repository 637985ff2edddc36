from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import structlog

from ntkparam.errors import ParameterCapError, ShapeError
from ntkparam.netspec import FanIn, LayerKind, NetworkSpec, Parameterization, fan_in_layers
from ntkparam.validation import ensure_valid

log = structlog.get_logger().bind(component="finite")

DEFAULT_PARAM_CAP = 100_000_000
_SEED_MASK = (1 << 64) - 1


class LayerScales(NamedTuple):
    """Initializer std and layer-equation prefactor for W and b."""

    weight_std: float
    weight_scale: float
    bias_std: float
    bias_scale: float


@dataclass(frozen=True)
class LayerParams:
    kind: LayerKind
    weight: np.ndarray
    bias: np.ndarray
    weight_scale: float
    bias_scale: float
    offsets: tuple[int, ...] = ()


@dataclass(frozen=True)
class FiniteNet:
    """One draw of a network at widths s·Nˡ; ``params`` follow the parametric layers."""

    spec: NetworkSpec
    scale_s: int
    seed: int
    params: tuple[LayerParams, ...]

    @property
    def num_params(self) -> int:
        return sum(p.weight.size + p.bias.size for p in self.params)

    @property
    def outputs(self) -> int:
        return self.params[-1].bias.shape[0]

    def with_params(self, params: tuple[LayerParams, ...]) -> FiniteNet:
        return replace(self, params=params)


class LayerSignal(NamedTuple):
    """Input activation and output cotangent of one parametric layer."""

    inputs: np.ndarray
    delta: np.ndarray


class ParamGradient(NamedTuple):
    weight: np.ndarray
    bias: np.ndarray


def layer_scales(
    param: Parameterization, sigma_w_sq: float, sigma_b_sq: float, fan: FanIn, s: int
) -> LayerScales:
    """Where each parameterization puts σ_w, σ_b, Nˡ, M and s."""
    width_s = s if fan.scaled else 1
    receptive = fan.base * fan.filter_size
    if param is Parameterization.NTK:
        return LayerScales(
            1.0, math.sqrt(sigma_w_sq / (width_s * receptive)), 1.0, math.sqrt(sigma_b_sq)
        )
    if param is Parameterization.NAIVE_STANDARD:
        return LayerScales(
            math.sqrt(sigma_w_sq / (width_s * receptive)), 1.0, math.sqrt(sigma_b_sq), 1.0
        )
    return LayerScales(
        math.sqrt(sigma_w_sq / receptive), 1.0 / math.sqrt(width_s), math.sqrt(sigma_b_sq), 1.0
    )


def _shapes(spec: NetworkSpec, s: int) -> list[tuple[FanIn, tuple[int, ...], int]]:
    shapes = []
    for fan in fan_in_layers(spec):
        width = fan.layer.base_width or 0
        fan_actual = fan.base * (s if fan.scaled else 1)
        out = width if fan.is_readout else s * width
        if fan.layer.kind is LayerKind.CONV:
            shapes.append((fan, (out, fan_actual, fan.filter_size), out))
        else:
            shapes.append((fan, (out, fan_actual), out))
    return shapes


def _generator(seed: int, layer: int, slot: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, layer, tensor)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([seed & _SEED_MASK, layer, slot]))
    )


def init(
    spec: NetworkSpec, s: int, seed: int, param_cap: int = DEFAULT_PARAM_CAP
) -> FiniteNet:
    """Draw every weight and bias from the parameterization's initializer."""
    ensure_valid(spec)
    if s < 1:
        raise ValueError("width scale s must be ≥ 1")
    shapes = _shapes(spec, s)
    total = sum(math.prod(shape) + out for _, shape, out in shapes)
    if total > param_cap:
        raise ParameterCapError(
            f"network has {total} parameters, cap is {param_cap}"
        )

    params = []
    for position, (fan, shape, out) in enumerate(shapes):
        scales = layer_scales(
            spec.parameterization, spec.hyper.sigma_w_sq, spec.hyper.sigma_b_sq, fan, s
        )
        weight = scales.weight_std * _generator(seed, position, 0).standard_normal(shape)
        bias = scales.bias_std * _generator(seed, position, 1).standard_normal(out)
        params.append(
            LayerParams(
                kind=fan.layer.kind,
                weight=weight,
                bias=bias,
                weight_scale=scales.weight_scale,
                bias_scale=scales.bias_scale,
                offsets=fan.layer.filter_offsets,
            )
        )
    log.debug("initialised network", s=s, seed=seed, params=total)
    return FiniteNet(spec=spec, scale_s=s, seed=seed, params=tuple(params))


def _shifted(a: np.ndarray, offsets: tuple[int, ...]) -> np.ndarray:
    """(n, C, P) → (n, C, M, P) with [..., k, p] = a[..., (p + m_k) mod P]."""
    return np.stack([np.roll(a, -m, axis=-1) for m in offsets], axis=2)


def _apply(p: LayerParams, a: np.ndarray) -> np.ndarray:
    if p.kind is LayerKind.CONV:
        z = np.einsum("ijm,njmp->nip", p.weight, _shifted(a, p.offsets))
        return p.weight_scale * z + p.bias_scale * p.bias[None, :, None]
    return p.weight_scale * (a @ p.weight.T) + p.bias_scale * p.bias


def _prepare_inputs(net: FiniteNet, x: np.ndarray) -> np.ndarray:
    spec = net.spec
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeError(f"inputs have shape {x.shape}, expected (n, {spec.input_dim})")
    if spec.is_convolutional:
        return x.reshape(x.shape[0], spec.input_channels, spec.spatial_size)
    return x


def forward_trace(net: FiniteNet, x: np.ndarray) -> list[np.ndarray]:
    """Activations entering each layer, followed by the network output."""
    acts = [_prepare_inputs(net, x)]
    params = iter(net.params)
    for layer in net.spec.layers:
        a = acts[-1]
        if layer.kind.is_parametric:
            acts.append(_apply(next(params), a))
        elif layer.kind is LayerKind.RELU:
            acts.append(np.maximum(a, 0.0))
        elif layer.kind is LayerKind.GAP:
            acts.append(a.mean(axis=-1))
        else:
            acts.append(a.reshape(a.shape[0], -1))
    return acts


def forward(net: FiniteNet, x: np.ndarray) -> np.ndarray:
    """Network outputs, shape (n, outputs)."""
    return forward_trace(net, x)[-1]


def backward(
    net: FiniteNet, acts: list[np.ndarray], out_grad: np.ndarray
) -> list[LayerSignal]:
    """Reverse-mode pass; returns one LayerSignal per parametric layer, in order.

    ``out_grad`` is the cotangent of the outputs, shape (n, outputs). ReLU uses
    the subgradient 0 at exactly 0.
    """
    signals: list[LayerSignal] = []
    params = list(net.params)
    delta = out_grad
    for index in range(len(net.spec.layers) - 1, -1, -1):
        layer = net.spec.layers[index]
        a = acts[index]
        if layer.kind.is_parametric:
            p = params.pop()
            signals.append(LayerSignal(a, delta))
            if index == 0:
                break
            if p.kind is LayerKind.CONV:
                back = np.zeros_like(a)
                for k, m in enumerate(p.offsets):
                    back += np.roll(
                        np.einsum("ij,nip->njp", p.weight[:, :, k], delta), m, axis=-1
                    )
                delta = p.weight_scale * back
            else:
                delta = p.weight_scale * (delta @ p.weight)
        elif layer.kind is LayerKind.RELU:
            delta = delta * (a > 0)
        elif layer.kind is LayerKind.GAP:
            delta = np.repeat(delta[:, :, None] / a.shape[-1], a.shape[-1], axis=-1)
        else:
            delta = delta.reshape(a.shape)
    signals.reverse()
    return signals


def _head_cotangent(net: FiniteNet, n: int, head: int) -> np.ndarray:
    if not 0 <= head < net.outputs:
        raise ShapeError(f"head {head} out of range for {net.outputs} outputs")
    out_grad = np.zeros((n, net.outputs))
    out_grad[:, head] = 1.0
    return out_grad


def parameter_gradients(net: FiniteNet, signals: list[LayerSignal]) -> list[ParamGradient]:
    """Batch-summed parameter gradients from a backward pass."""
    grads = []
    for p, (a, delta) in zip(net.params, signals):
        if p.kind is LayerKind.CONV:
            weight = np.einsum("nip,njmp->ijm", delta, _shifted(a, p.offsets))
            bias = delta.sum(axis=(0, 2))
        else:
            weight = delta.T @ a
            bias = delta.sum(axis=0)
        grads.append(ParamGradient(p.weight_scale * weight, p.bias_scale * bias))
    return grads


def jacobian(net: FiniteNet, x: np.ndarray, head: int = 0) -> list[ParamGradient]:
    """Per-sample gradients of output ``head``: arrays of shape (n, *param.shape)."""
    acts = forward_trace(net, x)
    n = acts[0].shape[0]
    signals = backward(net, acts, _head_cotangent(net, n, head))
    grads = []
    for p, (a, delta) in zip(net.params, signals):
        if p.kind is LayerKind.CONV:
            weight = np.einsum("nip,njmp->nijm", delta, _shifted(a, p.offsets))
            bias = delta.sum(axis=-1)
        else:
            weight = np.einsum("ni,nj->nij", delta, a)
            bias = delta
        grads.append(ParamGradient(p.weight_scale * weight, p.bias_scale * bias))
    return grads


def ntk_gram(net: FiniteNet, x: np.ndarray, head: int = 0) -> np.ndarray:
    """⟨∇_θ f(x_a), ∇_θ f(x_b)⟩ for one head, without materialising the Jacobian."""
    acts = forward_trace(net, x)
    n = acts[0].shape[0]
    signals = backward(net, acts, _head_cotangent(net, n, head))
    gram = np.zeros((n, n))
    for p, (a, delta) in zip(net.params, signals):
        if p.kind is LayerKind.CONV:
            cotangents = np.einsum("aip,biq->abpq", delta, delta)
            for k in range(len(p.offsets)):
                shifted = np.roll(a, -p.offsets[k], axis=-1)
                inputs = np.einsum("ajp,bjq->abpq", shifted, shifted)
                gram += p.weight_scale**2 * np.einsum("abpq,abpq->ab", cotangents, inputs)
            gram += p.bias_scale**2 * cotangents.sum(axis=(2, 3))
        else:
            cotangents = delta @ delta.T
            gram += p.weight_scale**2 * cotangents * (a @ a.T) + p.bias_scale**2 * cotangents
    return 0.5 * (gram + gram.T)
