from __future__ import annotations

from dataclasses import dataclass

from ntkparam.errors import SpecError
from ntkparam.netspec import Hyperparams, LayerKind, LayerSpec, NetworkSpec

MAX_LAYERS = 256


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_hyperparams(hyper: Hyperparams) -> tuple[bool, str | None]:
    """Validate the variance scales."""
    if not hyper.sigma_w_sq > 0:
        return False, "sigma_w_sq must be > 0"
    if not hyper.sigma_b_sq >= 0:
        return False, "sigma_b_sq must be >= 0"
    return True, None


def validate_layer(layer: LayerSpec) -> tuple[bool, str | None]:
    """Validate a single layer in isolation."""
    if layer.kind.is_parametric:
        if layer.base_width is None or layer.base_width < 1:
            return False, f"{layer.kind.value}: width must be ≥ 1"
    elif layer.base_width is not None:
        return False, f"{layer.kind.value}: non-parametric layer cannot carry a width"

    if layer.kind is LayerKind.CONV:
        offsets = layer.filter_offsets
        if not offsets:
            return False, "conv: filter offsets must be nonempty"
        if len(set(offsets)) != len(offsets):
            return False, "conv: filter offsets must be duplicate-free"
        if len(offsets) % 2 == 0:
            return False, "conv: filter size must be odd"
        if set(offsets) != {-m for m in offsets}:
            return False, "conv: filter offsets must be symmetric around 0"
    elif layer.filter_offsets:
        return False, f"{layer.kind.value}: only conv layers carry filter offsets"
    return True, None


def validate_input_shape(spec: NetworkSpec) -> tuple[bool, str | None]:
    """Validate input_dim / spatial_size against the layer chain."""
    if spec.input_dim < 1:
        return False, "input_dim must be ≥ 1"
    if spec.spatial_size < 1:
        return False, "spatial_size must be ≥ 1"
    if spec.is_convolutional:
        if spec.input_dim % spec.spatial_size:
            return False, "shape mismatch: input_dim is not channels × spatial_size"
    elif spec.spatial_size != 1:
        return False, "shape mismatch: spatial_size must be 1 without conv layers"
    return True, None


def _chain_violations(layers: tuple[LayerSpec, ...]) -> list[str]:
    violations: list[str] = []
    spatial = any(layer.kind is LayerKind.CONV for layer in layers)
    reduced = False
    for position, layer in enumerate(layers):
        if layer.kind is LayerKind.CONV and reduced:
            violations.append(f"layer {position}: pooling precedes conv")
        elif layer.kind.is_reduction:
            if reduced:
                violations.append(f"layer {position}: spatial axes already reduced")
            elif not spatial:
                violations.append(f"layer {position}: pooling without spatial input")
            reduced = True
        elif layer.kind is LayerKind.DENSE and spatial and not reduced:
            violations.append(
                f"layer {position}: dense layer receives spatial input; "
                "add gap or vec first"
            )

    if layers[0].kind is LayerKind.RELU:
        violations.append("activation cannot be the first layer")
    if layers[-1].kind is LayerKind.RELU:
        violations.append("activation cannot be the last layer")

    parametric = [layer for layer in layers if layer.kind.is_parametric]
    if not parametric:
        violations.append("network has no parametric layer")
    elif parametric[-1].kind is not LayerKind.DENSE:
        violations.append("readout must be a dense layer")
    elif not layers[-1].kind.is_parametric:
        violations.append("readout dense layer must be the last layer")
    return violations


def validate(spec: NetworkSpec) -> ValidationReport:
    """Collect every violation of the network-spec rules; never raises."""
    violations: list[str] = []
    if not spec.layers:
        return ValidationReport(("network has no layers",))
    if len(spec.layers) > MAX_LAYERS:
        violations.append(f"network has more than {MAX_LAYERS} layers")

    hyper_ok, hyper_error = validate_hyperparams(spec.hyper)
    if not hyper_ok:
        violations.append(hyper_error or "invalid hyperparameters")

    shape_ok, shape_error = validate_input_shape(spec)
    if not shape_ok:
        violations.append(shape_error or "invalid input shape")

    for position, layer in enumerate(spec.layers):
        layer_ok, layer_error = validate_layer(layer)
        if not layer_ok:
            violations.append(f"layer {position}: {layer_error}")

    violations += _chain_violations(spec.layers)
    return ValidationReport(tuple(violations))


def ensure_valid(spec: NetworkSpec) -> None:
    """Raise SpecError when ``spec`` does not validate."""
    report = validate(spec)
    if not report.ok:
        raise SpecError(
            "invalid network spec: " + "; ".join(report.violations),
            report.violations,
        )
