from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from ntkparam.commands import (
    CommandContext,
    kernel_predictions,
    load_splits,
    register,
    widths_label,
)
from ntkparam.data import regression_targets
from ntkparam.inference import classification_error, rmse
from ntkparam.netspec import Parameterization
from ntkparam.storage.results import write_predictions, write_rows

PAIRED = (Parameterization.NTK, Parameterization.IMPROVED_STANDARD)

COMPARE_COLUMNS = (
    "widths",
    "seed",
    "ntk_test_error",
    "improved_test_error",
    "ntk_nngp_error",
    "improved_nngp_error",
    "ntk_rmse",
    "improved_rmse",
)

_PREFIX = {Parameterization.NTK: "ntk", Parameterization.IMPROVED_STANDARD: "improved"}


@dataclass(frozen=True)
class _Point:
    widths: tuple[int, ...]
    seed: int

    def __str__(self) -> str:
        return f"{widths_label(self.widths)}/seed{self.seed}"

    @property
    def stem(self) -> str:
        return f"{widths_label(self.widths)}_seed{self.seed}"


@register(
    "compare",
    "Paired NTK vs improved-standard kernel regression errors",
    "ntkparam compare --config PATH",
)
async def cmd_compare(ctx: CommandContext) -> str:
    config = ctx.cfg
    splits = await load_splits(ctx)
    points = [_Point(w, seed) for w in config.widths_sweep for seed in config.seeds]
    center = config.dataset.center_targets

    def run(point: _Point) -> dict[str, Any]:
        train, test = splits[point.seed]
        targets = regression_targets(test, center)
        row: dict[str, Any] = {"widths": widths_label(point.widths), "seed": point.seed}
        for param in PAIRED:
            spec = config.spec.with_widths(point.widths).with_parameterization(param)
            preds = kernel_predictions(spec, train, test, config.ridge, center)
            prefix = _PREFIX[param]
            row[f"{prefix}_test_error"] = classification_error(preds.ntk, targets)
            row[f"{prefix}_nngp_error"] = classification_error(preds.nngp, targets)
            row[f"{prefix}_rmse"] = rmse(preds.ntk, targets)
            write_predictions(
                ctx.out_dir / "predictions" / f"compare_{param.value}_{point.stem}.csv",
                preds.ntk,
            )
        return row

    rows = await ctx.map_points("compare", run, points)
    path = write_rows(ctx.out_dir / "compare.csv", rows, COMPARE_COLUMNS)
    return f"compare: {len(rows)} paired rows → {path}"
