from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from ntkparam.commands import CommandContext, load_splits, register, widths_label
from ntkparam.errors import ConfigError
from ntkparam.finite import init, sgd_train
from ntkparam.netspec import Parameterization
from ntkparam.storage.results import write_trace, write_rows
from ntkparam.utils import derive_seed

TRAIN_COLUMNS = (
    "parameterization",
    "widths",
    "lr",
    "lr_effective",
    "seed",
    "best_val_error",
    "best_epoch",
    "epochs_run",
    "final_train_loss",
    "diverged",
)


@dataclass(frozen=True)
class _Point:
    parameterization: Parameterization
    width_index: int
    widths: tuple[int, ...]
    lr_index: int
    lr: float
    seed: int

    def __str__(self) -> str:
        return (
            f"{self.parameterization.value}/{widths_label(self.widths)}"
            f"/lr{self.lr_index:02d}/seed{self.seed}"
        )

    @property
    def stem(self) -> str:
        return str(self).replace("/", "_")


def effective_lr(lr: float, param: Parameterization, widths: tuple[int, ...], s: int) -> float:
    """Standard parameterizations divide the grid learning rate by the largest layer width."""
    if not param.is_standard or not widths:
        return lr
    largest = max(widths)
    if param is Parameterization.NAIVE_STANDARD:
        largest *= s
    return lr / largest


@register(
    "train-finite",
    "Train finite networks with SGD over a learning-rate grid",
    "ntkparam train-finite --config PATH",
)
async def cmd_train_finite(ctx: CommandContext) -> str:
    config = ctx.cfg
    readout = config.spec.layers[-1].base_width
    splits = await load_splits(ctx)
    classes = {train.classes for train, _ in splits.values()}
    if classes != {readout}:
        raise ConfigError(
            f"readout width {readout} does not match {sorted(classes)} target classes"
        )

    points = [
        _Point(param, wi, widths, li, lr, seed)
        for param in config.parameterizations
        for wi, widths in enumerate(config.widths_sweep)
        for li, lr in enumerate(config.lr_grid)
        for seed in config.seeds
    ]
    trace_dir = ctx.out_dir / "traces"

    def run(point: _Point) -> dict[str, Any]:
        train, test = splits[point.seed]
        spec = config.spec.with_widths(point.widths).with_parameterization(point.parameterization)
        # same init across the lr grid
        net = init(
            spec,
            config.train_scale,
            derive_seed(point.seed, 1, point.width_index),
            param_cap=config.param_cap,
        )
        lr = effective_lr(point.lr, point.parameterization, point.widths, config.train_scale)
        trace = sgd_train(
            net,
            train,
            lr,
            config.batch_size,
            config.epochs,
            derive_seed(point.seed, 2, point.width_index),
            val=test,
            center_targets=config.dataset.center_targets,
        )
        write_trace(trace_dir / f"{point.stem}.csv", trace)
        best_error, best_epoch = trace.best_val_error()
        return {
            "parameterization": point.parameterization.value,
            "widths": widths_label(point.widths),
            "lr": point.lr,
            "lr_effective": lr,
            "seed": point.seed,
            "best_val_error": best_error,
            "best_epoch": best_epoch,
            "epochs_run": trace.records[-1].epoch,
            "final_train_loss": trace.records[-1].train_loss,
            "diverged": int(trace.diverged),
        }

    rows = await ctx.map_points("train", run, points)
    path = write_rows(ctx.out_dir / "train_finite.csv", rows, TRAIN_COLUMNS)
    diverged = sum(row["diverged"] for row in rows)
    return f"train-finite: {len(rows)} runs ({diverged} diverged) → {path}"
