from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
from typing import Any, Iterable, Iterator, Sequence


class Parameterization(StrEnum):
    """Where the scale constants of an affine layer live."""

    NAIVE_STANDARD = "naive-standard"
    NTK = "ntk"
    IMPROVED_STANDARD = "improved-standard"

    @property
    def is_standard(self) -> bool:
        return self is not Parameterization.NTK


class LayerKind(StrEnum):
    DENSE = "dense"
    CONV = "conv"
    RELU = "relu"
    GAP = "gap"
    VEC = "vec"

    @property
    def is_parametric(self) -> bool:
        return self in (LayerKind.DENSE, LayerKind.CONV)

    @property
    def is_reduction(self) -> bool:
        return self in (LayerKind.GAP, LayerKind.VEC)


@dataclass(frozen=True)
class Hyperparams:
    """Weight and bias variance scales shared by every affine layer."""

    sigma_w_sq: float = 2.0
    sigma_b_sq: float = 0.1


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    base_width: int | None = None
    filter_offsets: tuple[int, ...] = ()

    @classmethod
    def dense(cls, width: int) -> LayerSpec:
        return cls(LayerKind.DENSE, base_width=width)

    @classmethod
    def conv(cls, channels: int, offsets: Sequence[int] = (-1, 0, 1)) -> LayerSpec:
        return cls(LayerKind.CONV, base_width=channels, filter_offsets=tuple(offsets))

    @classmethod
    def relu(cls) -> LayerSpec:
        return cls(LayerKind.RELU)

    @classmethod
    def gap(cls) -> LayerSpec:
        return cls(LayerKind.GAP)

    @classmethod
    def vec(cls) -> LayerSpec:
        return cls(LayerKind.VEC)

    @property
    def filter_size(self) -> int:
        """M, the number of spatial positions in the filter (1 for dense)."""
        return len(self.filter_offsets) if self.kind is LayerKind.CONV else 1

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"kind": self.kind.value}
        if self.base_width is not None:
            data["width"] = self.base_width
        if self.kind is LayerKind.CONV:
            data["offsets"] = list(self.filter_offsets)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LayerSpec:
        width = data.get("width")
        return cls(
            kind=LayerKind(data["kind"]),
            base_width=None if width is None else int(width),
            filter_offsets=tuple(int(m) for m in data.get("offsets", ())),
        )


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture, parameterization and hyperparameters of one network.

    ``input_dim`` is N⁰ for a fully connected network, or channels × pixels
    for a convolutional one, laid out channel-major (index ``c * P + p``).
    """

    layers: tuple[LayerSpec, ...]
    parameterization: Parameterization = Parameterization.IMPROVED_STANDARD
    hyper: Hyperparams = field(default_factory=Hyperparams)
    input_dim: int = 1
    spatial_size: int = 1

    @classmethod
    def fully_connected(
        cls,
        input_dim: int,
        hidden_widths: Sequence[int],
        outputs: int = 1,
        parameterization: Parameterization = Parameterization.IMPROVED_STANDARD,
        hyper: Hyperparams | None = None,
    ) -> NetworkSpec:
        """Dense/ReLU stack with one hidden layer per entry of ``hidden_widths``."""
        layers: list[LayerSpec] = []
        for width in hidden_widths:
            layers += [LayerSpec.dense(width), LayerSpec.relu()]
        layers.append(LayerSpec.dense(outputs))
        return cls(
            layers=tuple(layers),
            parameterization=parameterization,
            hyper=hyper or Hyperparams(),
            input_dim=input_dim,
        )

    @classmethod
    def convolutional(
        cls,
        channels: int,
        spatial_size: int,
        hidden_channels: Sequence[int],
        offsets: Sequence[int] = (-1, 0, 1),
        readout: str = "gap",
        outputs: int = 1,
        parameterization: Parameterization = Parameterization.IMPROVED_STANDARD,
        hyper: Hyperparams | None = None,
    ) -> NetworkSpec:
        """Constant-filter conv stack read out by global pooling or flattening."""
        layers: list[LayerSpec] = []
        for width in hidden_channels:
            layers += [LayerSpec.conv(width, offsets), LayerSpec.relu()]
        layers.append(LayerSpec(LayerKind(readout)))
        layers.append(LayerSpec.dense(outputs))
        return cls(
            layers=tuple(layers),
            parameterization=parameterization,
            hyper=hyper or Hyperparams(),
            input_dim=channels * spatial_size,
            spatial_size=spatial_size,
        )

    @property
    def is_convolutional(self) -> bool:
        return any(layer.kind is LayerKind.CONV for layer in self.layers)

    @property
    def input_channels(self) -> int:
        return self.input_dim // self.spatial_size if self.is_convolutional else self.input_dim

    @property
    def depth(self) -> int:
        """Number of parametric layers, readout included."""
        return sum(1 for layer in self.layers if layer.kind.is_parametric)

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        widths = [layer.base_width or 0 for layer in self.layers if layer.kind.is_parametric]
        return tuple(widths[:-1])

    def with_widths(self, widths: int | Sequence[int]) -> NetworkSpec:
        """Replace the base widths of every non-readout parametric layer."""
        hidden = parametric_indices(self.layers)[:-1]
        if isinstance(widths, int):
            widths = [widths] * len(hidden)
        if len(widths) != len(hidden):
            raise ValueError(
                f"expected {len(hidden)} hidden widths, got {len(widths)}"
            )
        layers = list(self.layers)
        for index, width in zip(hidden, widths):
            layers[index] = replace(layers[index], base_width=int(width))
        return replace(self, layers=tuple(layers))

    def with_parameterization(self, parameterization: Parameterization) -> NetworkSpec:
        return replace(self, parameterization=Parameterization(parameterization))

    def to_dict(self) -> dict[str, Any]:
        return {
            "parameterization": self.parameterization.value,
            "sigma_w_sq": self.hyper.sigma_w_sq,
            "sigma_b_sq": self.hyper.sigma_b_sq,
            "input_dim": self.input_dim,
            "spatial_size": self.spatial_size,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> NetworkSpec:
        return cls(
            layers=tuple(LayerSpec.from_dict(item) for item in data["layers"]),
            parameterization=Parameterization(
                data.get("parameterization", Parameterization.IMPROVED_STANDARD)
            ),
            hyper=Hyperparams(
                sigma_w_sq=float(data.get("sigma_w_sq", 2.0)),
                sigma_b_sq=float(data.get("sigma_b_sq", 0.1)),
            ),
            input_dim=int(data["input_dim"]),
            spatial_size=int(data.get("spatial_size", 1)),
        )

    def spec_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class FanIn:
    """Scaling facts for one parametric layer, shared by both engines.

    ``base`` is the baseline fan-in Nˡ (channels for conv, C·P after a
    vectorized readout). ``scaled`` is False only for the input layer, whose
    fan-in is the data dimension and never multiplied by s.
    """

    layer_index: int
    layer: LayerSpec
    base: int
    scaled: bool
    is_readout: bool

    @property
    def filter_size(self) -> int:
        return self.layer.filter_size


def fan_in_layers(spec: NetworkSpec) -> Iterator[FanIn]:
    """Yield the fan-in of each parametric layer in order (spec must be valid)."""
    parametric = parametric_indices(spec.layers)
    readout_index = parametric[-1] if parametric else -1
    features = spec.input_channels
    scaled = False
    for index, layer in enumerate(spec.layers):
        if layer.kind.is_parametric:
            yield FanIn(
                layer_index=index,
                layer=layer,
                base=features,
                scaled=scaled,
                is_readout=index == readout_index,
            )
            features = layer.base_width or 0
            scaled = True
        elif layer.kind is LayerKind.VEC:
            features *= spec.spatial_size


def parametric_indices(layers: Iterable[LayerSpec]) -> list[int]:
    return [i for i, layer in enumerate(layers) if layer.kind.is_parametric]
