from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import structlog

from ntkparam.errors import DatasetError

log = structlog.get_logger().bind(component="data")

CIFAR_RECORD_BYTES = 3073
CIFAR_PIXELS = 3072
CIFAR_CHANNELS = 3
CIFAR_CLASSES = 10

SYNTHETIC_KINDS = ("two-spheres", "xor-clusters")
SPHERE_RADII = (1.0, 2.0)


@dataclass(frozen=True)
class DatasetMeta:
    """Provenance of a dataset or split."""

    source: str
    seed: int | None = None
    channels: int = 1
    split: str = "full"
    extra: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    meta: DatasetMeta

    def __post_init__(self) -> None:
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise DatasetError("inputs and targets must be 2-D")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise DatasetError(
                f"{self.inputs.shape[0]} inputs but {self.targets.shape[0]} targets"
            )
        if self.targets.size and not (
            np.all((self.targets == 0) | (self.targets == 1))
            and np.all(self.targets.sum(axis=1) == 1)
        ):
            raise DatasetError("every target row must be one-hot")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def classes(self) -> int:
        return self.targets.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.targets, axis=1)

    def take(self, indices: np.ndarray, split: str) -> Dataset:
        return Dataset(
            self.inputs[indices],
            self.targets[indices],
            replace(self.meta, split=split),
        )


def one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    targets = np.zeros((labels.shape[0], classes))
    targets[np.arange(labels.shape[0]), labels] = 1.0
    return targets


def load_cifar10(paths: Sequence[str | Path]) -> Dataset:
    """Parse CIFAR-10 binary batches: 1 label byte + 3072 pixel bytes per record.

    Pixels stay in file order (channel, row, column), scaled to [0, 1], so
    pixel (c, y, x) lands in column c·1024 + y·32 + x.
    """
    records = []
    for path in paths:
        raw = Path(path).read_bytes()
        if len(raw) % CIFAR_RECORD_BYTES:
            raise DatasetError(
                f"{path}: length {len(raw)} is not a multiple of {CIFAR_RECORD_BYTES}"
            )
        records.append(np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES))
    table = np.concatenate(records) if records else np.zeros((0, CIFAR_RECORD_BYTES), np.uint8)
    labels = table[:, 0].astype(np.int64)
    if labels.size and labels.max() >= CIFAR_CLASSES:
        raise DatasetError(f"label byte {labels.max()} is out of range 0-9")
    inputs = table[:, 1:].astype(np.float64) / 255.0
    log.info("cifar10 loaded", files=len(records), n=labels.shape[0])
    return Dataset(
        inputs,
        one_hot(labels, CIFAR_CLASSES),
        DatasetMeta(source="cifar10", channels=CIFAR_CHANNELS),
    )


def synthetic(kind: str, n: int, d: int, noise: float, seed: int) -> Dataset:
    """Balanced two-class data.

    ``two-spheres``: class c on the sphere of radius SPHERE_RADII[c];
    ``xor-clusters``: four clusters at (±1, ±1, 0, …) labelled by the sign
    product. Gaussian noise of std ``noise`` is added to every coordinate.
    """
    if kind not in SYNTHETIC_KINDS:
        raise DatasetError(f"unknown synthetic dataset {kind!r}")
    if n % 2 or n <= 0:
        raise DatasetError("synthetic datasets need a positive even n")
    if d < 2:
        raise DatasetError("synthetic datasets need d ≥ 2")

    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], n // 2)
    if kind == "two-spheres":
        directions = rng.standard_normal((n, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        inputs = directions * np.asarray(SPHERE_RADII)[labels][:, None]
    else:
        # per class, alternate between its two clusters
        corner = np.arange(n) % 2
        first = np.where(corner == 0, 1.0, -1.0)
        second = np.where(labels == 0, first, -first)
        inputs = np.zeros((n, d))
        inputs[:, 0], inputs[:, 1] = first, second
    inputs = inputs + noise * rng.standard_normal((n, d))
    order = rng.permutation(n)
    return Dataset(
        inputs[order],
        one_hot(labels[order], 2),
        DatasetMeta(source=f"synthetic:{kind}", seed=seed, extra={"noise": str(noise)}),
    )


def subset(
    data: Dataset, n_train: int, n_test: int, seed: int
) -> tuple[Dataset, Dataset]:
    """Disjoint class-stratified train/test samples.

    Per-class counts differ by at most 1 unless a class runs out of points, in
    which case the other classes make up its share.
    """
    if n_train < 0 or n_test < 0 or n_train + n_test > data.n:
        raise DatasetError(
            f"cannot take {n_train} + {n_test} points from {data.n}"
        )
    rng = np.random.default_rng(seed)
    pools = [rng.permutation(np.flatnonzero(data.labels == c)) for c in range(data.classes)]
    pools = [pool for pool in pools if pool.size]
    taken = [0] * len(pools)

    def draw(count: int) -> np.ndarray:
        # water-fill: exhausted pools pass their share to the rest
        room = [pool.size - t for pool, t in zip(pools, taken)]
        quotas = [0] * len(pools)
        order = rng.permutation(len(pools))
        remaining = count
        while remaining:
            open_ = [c for c in order if quotas[c] < room[c]]
            share = remaining // len(open_)
            if share == 0:
                for c in open_[:remaining]:
                    quotas[c] += 1
                break
            for c in open_:
                step = min(share, room[c] - quotas[c])
                quotas[c] += step
                remaining -= step
        chosen = []
        for c, quota in enumerate(quotas):
            chosen.append(pools[c][taken[c] : taken[c] + quota])
            taken[c] += quota
        return np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, int)

    train_idx = draw(n_train)
    test_idx = draw(n_test)
    return data.take(train_idx, "train"), data.take(test_idx, "test")


def standardize(
    train: Dataset, test: Dataset, channels: int | None = None
) -> tuple[Dataset, Dataset]:
    """Per-channel standardisation with statistics from the train split only."""
    channels = channels or train.meta.channels
    if train.dim % channels:
        raise DatasetError(f"{train.dim} features do not split into {channels} channels")
    blocks = train.inputs.reshape(train.n, channels, -1)
    mean = blocks.mean(axis=(0, 2))
    std = blocks.std(axis=(0, 2))
    std = np.where(std > 0, std, 1.0)

    def apply(data: Dataset) -> Dataset:
        shaped = data.inputs.reshape(data.n, channels, -1)
        scaled = (shaped - mean[None, :, None]) / std[None, :, None]
        return Dataset(scaled.reshape(data.n, -1), data.targets, data.meta)

    return apply(train), apply(test)


def regression_targets(data: Dataset, centered: bool = False) -> np.ndarray:
    """One-hot regression targets, optionally shifted by −1/k."""
    if centered:
        return data.targets - 1.0 / data.classes
    return data.targets.copy()
