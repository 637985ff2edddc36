from __future__ import annotations

import contextlib
import hashlib
import io
import json
import tempfile
import unittest
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from ntkparam.cli import main
from ntkparam.commands import (
    CommandContext,
    dispatch,
    get_all_commands,
    load_commands,
    prepare_data,
)
from ntkparam.config import ExperimentConfig
from ntkparam.netspec import NetworkSpec, Parameterization
from ntkparam.storage import Journal, load_kernel


def _config(**extra: Any) -> dict[str, Any]:
    data: dict[str, Any] = {
        "spec": NetworkSpec.fully_connected(4, [4], outputs=2).to_dict(),
        "dataset": {"source": "synthetic", "kind": "two-spheres", "n": 40, "d": 4,
                    "n_train": 12, "n_test": 8},
        "widths_sweep": [4, 16],
        "s_sweep": [1, 2],
        "draws": 2,
        "lr_grid": [0.1],
        "epochs": 2,
        "batch_size": 4,
        "seeds": [0],
    }
    data.update(extra)
    return data


class CliTests(unittest.IsolatedAsyncioTestCase):
    async def asyncSetUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)
        self.out = self.root / "out"

    async def asyncTearDown(self) -> None:
        self._tmp.cleanup()

    def _write_config(self, **extra: Any) -> Path:
        path = self.root / "config.json"
        path.write_text(json.dumps(_config(**extra)))
        return path

    async def _run(self, *argv: str) -> tuple[int, str]:
        buffer = io.StringIO()
        with contextlib.redirect_stdout(buffer):
            code = await main([*argv, "--out", str(self.out)])
        return code, buffer.getvalue()

    async def test_kernel_writes_files_and_summary(self) -> None:
        config = self._write_config(parameterizations=["improved-standard", "naive-standard"])
        code, output = await self._run("kernel", "--config", str(config))
        self.assertEqual(code, 0)
        self.assertIn("kernel: 4 configurations", output)

        summary = pd.read_csv(self.out / "kernel_summary.csv")
        self.assertEqual(len(summary), 4)
        statuses = dict(zip(summary["parameterization"], summary["status"]))
        self.assertEqual(statuses["naive-standard"], "divergent-ntk")
        self.assertEqual(statuses["improved-standard"], "ok")

        kernels = self.out / "kernels"
        matrix, meta = load_kernel(kernels / "improved-standard_4_seed0_ntk.bin")
        self.assertEqual(matrix.shape, (20, 20))
        self.assertEqual(meta["kernel"], "ntk")
        self.assertEqual(meta["n_train"], "12")
        self.assertTrue((kernels / "naive-standard_4_seed0_nngp.bin").exists())
        self.assertFalse((kernels / "naive-standard_4_seed0_ntk.bin").exists())

    async def test_kernel_rerun_is_bitwise_identical(self) -> None:
        config = self._write_config(threads=2)
        await self._run("kernel", "--config", str(config))
        kernels = sorted((self.out / "kernels").glob("*.bin"))
        first = {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in kernels}
        await self._run("kernel", "--config", str(config), "--threads", "1")
        second = {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in kernels}
        self.assertEqual(first, second)
        self.assertEqual(len(first), 8)

    async def test_compare(self) -> None:
        code, _ = await self._run("compare", "--config", str(self._write_config()))
        self.assertEqual(code, 0)
        frame = pd.read_csv(self.out / "compare.csv")
        self.assertEqual(list(frame["widths"]), [4, 16])
        self.assertTrue(frame["ntk_test_error"].between(0, 1).all())
        self.assertTrue(
            (self.out / "predictions" / "compare_improved-standard_16_seed0.csv").exists()
        )

    async def test_sweep_widths_shares_ntk_baseline(self) -> None:
        code, _ = await self._run("sweep-widths", "--config", str(self._write_config()))
        self.assertEqual(code, 0)
        frame = pd.read_csv(self.out / "sweep_widths.csv")
        self.assertEqual(len(frame), 2)
        self.assertEqual(frame["ntk_baseline_rmse"].nunique(), 1)

    async def test_mc_validate_with_slopes(self) -> None:
        config = self._write_config(parameterizations=["ntk", "naive-standard"])
        code, _ = await self._run("mc-validate", "--config", str(config))
        self.assertEqual(code, 0)
        frame = pd.read_csv(self.out / "mc_validate.csv")
        self.assertEqual(len(frame), 4)
        naive = frame[frame["parameterization"] == "naive-standard"]
        self.assertTrue(naive["ntk_rel_error"].isna().all())
        self.assertTrue(np.isfinite(frame["nngp_rel_error"]).all())
        slopes = pd.read_csv(self.out / "mc_validate_slopes.csv")
        self.assertEqual(list(slopes["parameterization"]), ["naive-standard"])

    async def test_train_finite(self) -> None:
        code, output = await self._run("train-finite", "--config", str(self._write_config()))
        self.assertEqual(code, 0)
        self.assertIn("train-finite: 4 runs", output)
        frame = pd.read_csv(self.out / "train_finite.csv")
        self.assertEqual(set(frame["parameterization"]), {"ntk", "improved-standard"})
        self.assertTrue((frame["epochs_run"] <= 2).all())
        traces = sorted((self.out / "traces").glob("*.csv"))
        self.assertEqual(len(traces), 4)

    async def test_train_finite_rejects_readout_mismatch(self) -> None:
        spec = NetworkSpec.fully_connected(4, [4], outputs=3).to_dict()
        config = self._write_config(spec=spec)
        code, _ = await self._run("train-finite", "--config", str(config))
        self.assertEqual(code, 2)

    async def test_status_lists_runs(self) -> None:
        await self._run("kernel", "--config", str(self._write_config()))
        code, output = await self._run("status")
        self.assertEqual(code, 0)
        self.assertIn("Runs: 1 (1 ok, 0 failed)", output)
        self.assertIn("kernel [ok]", output)
        self.assertIn("Steps of run #1", output)

    async def test_config_errors_exit_two(self) -> None:
        code, _ = await self._run("kernel")
        self.assertEqual(code, 2)
        code, _ = await self._run("kernel", "--config", str(self.root / "missing.json"))
        self.assertEqual(code, 2)
        code, _ = await self._run("kernel", "--config", str(self._write_config(draws=0)))
        self.assertEqual(code, 2)
        code, _ = await self._run("train-finite", "--config", str(self._write_config(epochs=-1)))
        self.assertEqual(code, 2)

    async def test_dimension_mismatch_fails_run(self) -> None:
        spec = NetworkSpec.fully_connected(5, [4], outputs=2).to_dict()
        code, _ = await self._run("kernel", "--config", str(self._write_config(spec=spec)))
        self.assertEqual(code, 2)


class DispatchTests(unittest.IsolatedAsyncioTestCase):
    @classmethod
    def setUpClass(cls) -> None:
        load_commands()

    async def asyncSetUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.journal = Journal(str(Path(self._tmp.name) / "journal.db"))
        await self.journal.connect()

    async def asyncTearDown(self) -> None:
        await self.journal.close()
        self._tmp.cleanup()

    def test_registry(self) -> None:
        names = set(get_all_commands())
        self.assertEqual(
            names,
            {"kernel", "compare", "sweep-widths", "mc-validate", "train-finite", "status"},
        )
        self.assertFalse(get_all_commands()["status"].needs_config)

    async def test_unknown_command(self) -> None:
        ctx = CommandContext(None, self.journal, Path(self._tmp.name))
        self.assertEqual(await dispatch("fit", ctx), 2)

    async def test_failed_run_is_journaled(self) -> None:
        config = ExperimentConfig.from_dict(
            _config(spec=NetworkSpec.fully_connected(
                4, [4], outputs=3, parameterization=Parameterization.NTK
            ).to_dict())
        )
        ctx = CommandContext(config, self.journal, Path(self._tmp.name))
        with contextlib.redirect_stdout(io.StringIO()):
            code = await dispatch("train-finite", ctx)
        self.assertEqual(code, 2)
        runs = await self.journal.get_runs()
        self.assertEqual((runs[0][1], runs[0][4]), ("train-finite", "failed"))


class PrepareDataTests(unittest.TestCase):
    def test_standardizes_each_input_channel(self) -> None:
        config = ExperimentConfig.from_dict({
            "spec": NetworkSpec.convolutional(2, 4, [3], outputs=2).to_dict(),
            "dataset": {"source": "synthetic", "kind": "xor-clusters", "n": 40, "d": 8,
                        "noise": 0.1, "n_train": 20, "n_test": 10, "standardize": True},
        })
        train, _ = prepare_data(config, seed=0)
        blocks = train.inputs.reshape(train.n, 2, 4)
        np.testing.assert_allclose(blocks.mean(axis=(0, 2)), 0.0, atol=1e-12)
        np.testing.assert_allclose(blocks.std(axis=(0, 2)), 1.0, rtol=1e-12)


if __name__ == "__main__":
    unittest.main()
