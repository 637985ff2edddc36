from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from ntkparam.commands import CommandContext, load_splits, register, widths_label
from ntkparam.data import Dataset
from ntkparam.kernels import kernel_stats, propagate
from ntkparam.netspec import Parameterization
from ntkparam.storage import save_kernel
from ntkparam.storage.results import write_rows

SUMMARY_COLUMNS = (
    "parameterization",
    "widths",
    "seed",
    "n",
    "status",
    "nngp_file",
    "ntk_file",
    "nngp_mean_diag",
    "nngp_min_eig",
    "ntk_mean_diag",
    "ntk_min_eig",
)


@dataclass(frozen=True)
class _Point:
    parameterization: Parameterization
    widths: tuple[int, ...]
    seed: int

    def __str__(self) -> str:
        return f"{self.parameterization.value}/{widths_label(self.widths)}/seed{self.seed}"


@register(
    "kernel",
    "Compute and store NNGP and NTK matrices for every configuration",
    "ntkparam kernel --config PATH",
)
async def cmd_kernel(ctx: CommandContext) -> str:
    config = ctx.cfg
    splits = await load_splits(ctx)
    points = [
        _Point(param, widths, seed)
        for param in config.parameterizations
        for widths in config.widths_sweep
        for seed in config.seeds
    ]
    kernel_dir = ctx.out_dir / "kernels"

    def run(point: _Point) -> dict[str, Any]:
        train, test = splits[point.seed]
        inputs = np.vstack([train.inputs, test.inputs])
        spec = config.spec.with_widths(point.widths).with_parameterization(point.parameterization)
        state = propagate(spec, inputs)
        stem = f"{point.parameterization.value}_{widths_label(point.widths)}_seed{point.seed}"
        meta = _meta(spec.spec_hash(), point, train)

        nngp_path = save_kernel(kernel_dir / f"{stem}_nngp.bin", state.nngp, meta | {"kernel": "nngp"})
        nngp = kernel_stats(state.nngp)
        row: dict[str, Any] = {
            "parameterization": point.parameterization.value,
            "widths": widths_label(point.widths),
            "seed": point.seed,
            "n": inputs.shape[0],
            "nngp_file": nngp_path.name,
            "nngp_mean_diag": nngp.mean_diag,
            "nngp_min_eig": nngp.min_eig,
        }
        if state.is_divergent:
            return row | {"status": "divergent-ntk", "ntk_file": "",
                          "ntk_mean_diag": np.nan, "ntk_min_eig": np.nan}
        ntk_path = save_kernel(kernel_dir / f"{stem}_ntk.bin", state.ntk_matrix(), meta | {"kernel": "ntk"})
        ntk = kernel_stats(state.ntk_matrix())
        return row | {"status": "ok", "ntk_file": ntk_path.name,
                      "ntk_mean_diag": ntk.mean_diag, "ntk_min_eig": ntk.min_eig}

    rows = await ctx.map_points("kernel", run, points)
    path = write_rows(ctx.out_dir / "kernel_summary.csv", rows, SUMMARY_COLUMNS)
    return f"kernel: {len(rows)} configurations → {path}"


def _meta(spec_hash: str, point: _Point, train: Dataset) -> dict[str, str]:
    return {
        "spec_hash": spec_hash,
        "parameterization": point.parameterization.value,
        "widths": widths_label(point.widths),
        "seed": str(point.seed),
        "n_train": str(train.n),
        "source": train.meta.source,
    }
