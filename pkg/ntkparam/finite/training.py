from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import structlog

from ntkparam.data import Dataset, regression_targets
from ntkparam.finite.net import (
    FiniteNet,
    LayerParams,
    backward,
    forward,
    forward_trace,
    parameter_gradients,
)
from ntkparam.utils import derive_seed

log = structlog.get_logger().bind(component="train")

DIVERGENCE_LOSS = 1e6

TRACE_COLUMNS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc", "diverged")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    diverged: bool


@dataclass(frozen=True)
class TrainingTrace:
    records: tuple[EpochRecord, ...]
    net: FiniteNet
    lr: float
    seed: int

    @property
    def diverged(self) -> bool:
        return bool(self.records) and self.records[-1].diverged

    def best_val_error(self) -> tuple[float, int]:
        """(lowest validation error, epoch); diverged epochs never count."""
        finite = [r for r in self.records if not r.diverged]
        if not finite:
            return 1.0, 0
        best = max(finite, key=lambda r: (r.val_acc, -r.epoch))
        return 1.0 - best.val_acc, best.epoch


def mse_loss(predictions: np.ndarray, targets: np.ndarray) -> float:
    """½ · squared error summed over outputs, averaged over points."""
    if predictions.shape[0] == 0:
        return 0.0
    return float(0.5 * np.sum((predictions - targets) ** 2) / predictions.shape[0])


def accuracy(predictions: np.ndarray, targets: np.ndarray) -> float:
    if predictions.shape[0] == 0:
        return 0.0
    if targets.shape[1] == 1:
        return float(np.mean(np.sign(predictions[:, 0]) == np.sign(targets[:, 0])))
    return float(np.mean(np.argmax(predictions, axis=1) == np.argmax(targets, axis=1)))


class _Model:
    """Training-time view of a net; optionally subtracts its initial function."""

    def __init__(self, net: FiniteNet, centered: bool) -> None:
        self.net = net
        self.initial = net if centered else None

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = forward(self.net, x)
        if self.initial is not None:
            out = out - forward(self.initial, x)
        return out


def _evaluate(model: _Model, data: Dataset, targets: np.ndarray) -> tuple[float, float]:
    predictions = model.predict(data.inputs)
    return mse_loss(predictions, targets), accuracy(predictions, targets)


def _step(net: FiniteNet, x: np.ndarray, residual: np.ndarray, lr: float) -> FiniteNet:
    acts = forward_trace(net, x)
    grads = parameter_gradients(net, backward(net, acts, residual / x.shape[0]))
    params = tuple(
        LayerParams(
            kind=p.kind,
            weight=p.weight - lr * g.weight,
            bias=p.bias - lr * g.bias,
            weight_scale=p.weight_scale,
            bias_scale=p.bias_scale,
            offsets=p.offsets,
        )
        for p, g in zip(net.params, grads)
    )
    return net.with_params(params)


def sgd_train(
    net: FiniteNet,
    data: Dataset,
    lr: float,
    batch: int,
    epochs: int,
    seed: int,
    val: Dataset | None = None,
    centered: bool = False,
    center_targets: bool = False,
) -> TrainingTrace:
    """Vanilla minibatch SGD on the MSE loss; epoch 0 records the initial net.

    Training stops at the first epoch whose train loss exceeds
    DIVERGENCE_LOSS or is non-finite; that epoch is flagged ``diverged``.
    """
    if lr < 0 or batch < 1 or epochs < 0:
        raise ValueError("need lr ≥ 0, batch ≥ 1 and epochs ≥ 0")
    val = val if val is not None else data
    targets = regression_targets(data, center_targets)
    val_targets = regression_targets(val, center_targets)
    model = _Model(net, centered)
    rng = np.random.default_rng(derive_seed(seed, 0))

    def record(epoch: int) -> EpochRecord:
        with np.errstate(over="ignore", invalid="ignore"):
            train_loss, train_acc = _evaluate(model, data, targets)
            val_loss, val_acc = _evaluate(model, val, val_targets)
        diverged = not math.isfinite(train_loss) or train_loss > DIVERGENCE_LOSS
        return EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc, diverged)

    records = [record(0)]
    for epoch in range(1, epochs + 1):
        if records[-1].diverged:
            break
        order = rng.permutation(data.n)
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, data.n, batch):
                idx = order[start : start + batch]
                x = data.inputs[idx]
                residual = model.predict(x) - targets[idx]
                model.net = _step(model.net, x, residual, lr)
        records.append(record(epoch))

    trace = TrainingTrace(tuple(records), model.net, lr, seed)
    if trace.diverged:
        log.info("sgd diverged", lr=lr, epoch=records[-1].epoch)
    return trace
