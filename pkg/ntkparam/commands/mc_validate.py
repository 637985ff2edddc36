from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from ntkparam.commands import CommandContext, load_splits, register
from ntkparam.finite import empirical_kernels, loglog_slope, relative_frobenius_error
from ntkparam.inference import critical_lr
from ntkparam.kernels import propagate
from ntkparam.netspec import Parameterization
from ntkparam.storage.results import write_rows

MC_COLUMNS = (
    "parameterization",
    "s",
    "draws",
    "seed",
    "nngp_rel_error",
    "ntk_rel_error",
    "ntk_mean_diag",
    "critical_lr",
)

SLOPE_COLUMNS = ("parameterization", "seed", "ntk_diag_slope", "critical_lr_slope")


@dataclass(frozen=True)
class _Point:
    parameterization: Parameterization
    s: int
    seed: int

    def __str__(self) -> str:
        return f"{self.parameterization.value}/s{self.s}/seed{self.seed}"


@register(
    "mc-validate",
    "Relative Frobenius error of Monte Carlo kernels against the analytic ones",
    "ntkparam mc-validate --config PATH",
)
async def cmd_mc_validate(ctx: CommandContext) -> str:
    config = ctx.cfg
    splits = await load_splits(ctx)
    points = [
        _Point(param, s, seed)
        for param in config.parameterizations
        for s in config.s_sweep
        for seed in config.seeds
    ]

    def run(point: _Point) -> dict[str, Any]:
        x = splits[point.seed][0].inputs
        spec = config.spec.with_parameterization(point.parameterization)
        analytic = propagate(spec, x)
        empirical = empirical_kernels(
            spec, x, point.s, config.draws, point.seed, param_cap=config.param_cap
        )
        ntk_error = (
            np.nan
            if analytic.is_divergent
            else relative_frobenius_error(empirical.ntk_hat, analytic.ntk_matrix())
        )
        return {
            "parameterization": point.parameterization.value,
            "s": point.s,
            "draws": config.draws,
            "seed": point.seed,
            "nngp_rel_error": relative_frobenius_error(empirical.nngp_hat, analytic.nngp),
            "ntk_rel_error": ntk_error,
            "ntk_mean_diag": float(np.mean(np.diag(empirical.ntk_hat))),
            "critical_lr": critical_lr(empirical.ntk_hat),
        }

    rows = await ctx.map_points("mc-validate", run, points)
    path = write_rows(ctx.out_dir / "mc_validate.csv", rows, MC_COLUMNS)

    slopes = _divergence_slopes(rows, config.s_sweep)
    if slopes:
        write_rows(ctx.out_dir / "mc_validate_slopes.csv", slopes, SLOPE_COLUMNS)
    return f"mc-validate: {len(rows)} rows → {path}"


def _divergence_slopes(rows: list[dict[str, Any]], s_sweep: list[int]) -> list[dict[str, Any]]:
    """Log-log slopes of the naive standard NTK diagonal and critical lr against s."""
    if len(set(s_sweep)) < 2:
        return []
    naive = Parameterization.NAIVE_STANDARD.value
    slopes = []
    for seed in dict.fromkeys(row["seed"] for row in rows if row["parameterization"] == naive):
        series = [r for r in rows if r["parameterization"] == naive and r["seed"] == seed]
        s_values = [r["s"] for r in series]
        slopes.append({
            "parameterization": naive,
            "seed": seed,
            "ntk_diag_slope": loglog_slope(s_values, [r["ntk_mean_diag"] for r in series]),
            "critical_lr_slope": loglog_slope(s_values, [r["critical_lr"] for r in series]),
        })
    return slopes
