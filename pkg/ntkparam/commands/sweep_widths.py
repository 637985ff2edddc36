from __future__ import annotations

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
from ntkparam.netspec import NetworkSpec, Parameterization
from ntkparam.storage.results import write_rows

SWEEP_COLUMNS = (
    "widths",
    "max_width",
    "seed",
    "improved_test_error",
    "improved_rmse",
    "ntk_baseline_error",
    "ntk_baseline_rmse",
)


@register(
    "sweep-widths",
    "Improved-standard test error across baseline widths, with an NTK baseline",
    "ntkparam sweep-widths --config PATH",
)
async def cmd_sweep_widths(ctx: CommandContext) -> str:
    config = ctx.cfg
    splits = await load_splits(ctx)
    center = config.dataset.center_targets

    def evaluate(spec: NetworkSpec, seed: int) -> tuple[float, float]:
        train, test = splits[seed]
        targets = regression_targets(test, center)
        preds = kernel_predictions(spec, train, test, config.ridge, center).ntk
        return classification_error(preds, targets), rmse(preds, targets)

    # width-independent under NTK parameterization
    ntk_spec = config.spec.with_parameterization(Parameterization.NTK)
    baselines = await ctx.map_points(
        "baseline", lambda seed: evaluate(ntk_spec, seed), config.seeds, lambda s: f"seed{s}"
    )
    baseline_by_seed = dict(zip(config.seeds, baselines))

    improved = config.spec.with_parameterization(Parameterization.IMPROVED_STANDARD)
    points = [(w, seed) for w in config.widths_sweep for seed in config.seeds]

    def run(point: tuple[tuple[int, ...], int]) -> dict[str, Any]:
        widths, seed = point
        error, err_rmse = evaluate(improved.with_widths(widths), seed)
        base_error, base_rmse = baseline_by_seed[seed]
        return {
            "widths": widths_label(widths),
            "max_width": max(widths, default=0),
            "seed": seed,
            "improved_test_error": error,
            "improved_rmse": err_rmse,
            "ntk_baseline_error": base_error,
            "ntk_baseline_rmse": base_rmse,
        }

    rows = await ctx.map_points(
        "sweep", run, points, lambda p: f"{widths_label(p[0])}/seed{p[1]}"
    )
    path = write_rows(ctx.out_dir / "sweep_widths.csv", rows, SWEEP_COLUMNS)
    return f"sweep-widths: {len(rows)} rows → {path}"
