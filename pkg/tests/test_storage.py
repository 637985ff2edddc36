from __future__ import annotations

import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.testing import assert_array_equal

from ntkparam.finite import init
from ntkparam.finite.training import TRACE_COLUMNS, EpochRecord, TrainingTrace
from ntkparam.netspec import NetworkSpec
from ntkparam.storage import Journal, load_kernel, save_kernel
from ntkparam.storage.kernel_file import MAGIC
from ntkparam.storage.results import read_rows, write_predictions, write_rows, write_trace


class KernelFileTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def test_matrix_layout(self) -> None:
        matrix = np.arange(9, dtype=float).reshape(3, 3)
        path = save_kernel(self.root / "k.bin", matrix, {"seed": "0", "kernel": "ntk"})
        raw = path.read_bytes()
        self.assertEqual(raw[:8], MAGIC)
        dims = np.frombuffer(raw[8:40], dtype="<u8")
        assert_array_equal(dims, [3, 3, 1, 1])
        self.assertEqual(len(raw), 40 + 9 * 8)
        loaded, meta = load_kernel(path)
        assert_array_equal(loaded, matrix)
        self.assertEqual(meta, {"kernel": "ntk", "seed": "0"})

    def test_spatial_kernel_keeps_four_axes(self) -> None:
        kernel = np.random.default_rng(0).standard_normal((2, 2, 3, 3))
        loaded, meta = load_kernel(save_kernel(self.root / "conv.bin", kernel, {}))
        self.assertEqual(loaded.shape, (2, 2, 3, 3))
        assert_array_equal(loaded, kernel)
        self.assertEqual(meta, {})

    def test_bad_files_rejected(self) -> None:
        bad = self.root / "bad.bin"
        bad.write_bytes(b"NOTAKERN" + bytes(32))
        with self.assertRaises(ValueError):
            load_kernel(bad)
        bad.write_bytes(MAGIC)
        with self.assertRaises(ValueError):
            load_kernel(bad)
        with self.assertRaises(ValueError):
            save_kernel(self.root / "v.bin", np.zeros(3), {})


class ResultFileTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def test_rows_keep_column_order(self) -> None:
        path = write_rows(
            self.root / "out" / "rows.csv",
            [{"b": 2, "a": 0.1}, {"a": 0.3, "b": 4}],
            ["a", "b"],
        )
        self.assertEqual(path.read_text().splitlines()[0], "a,b")
        frame = read_rows(path)
        self.assertEqual(list(frame["b"]), [2, 4])
        self.assertEqual(frame["a"][0], 0.1)

    def test_empty_rows_write_header(self) -> None:
        path = write_rows(self.root / "empty.csv", [], ["x", "y"])
        self.assertEqual(path.read_text(), "x,y\n")

    def test_trace_columns(self) -> None:
        records = (
            EpochRecord(0, 0.5, 0.5, 0.6, 0.4, False),
            EpochRecord(1, float("inf"), 0.0, float("inf"), 0.0, True),
        )
        net = init(NetworkSpec.fully_connected(2, [2]), 1, seed=0)
        path = write_trace(self.root / "trace.csv", TrainingTrace(records, net, 0.1, 0))
        frame = pd.read_csv(path)
        self.assertEqual(tuple(frame.columns), TRACE_COLUMNS)
        self.assertEqual(list(frame["diverged"]), [0, 1])

    def test_predictions_include_label(self) -> None:
        path = write_predictions(self.root / "p.csv", np.array([[0.1, 0.9], [0.8, 0.2]]))
        frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), ["class_0", "class_1", "label"])
        self.assertEqual(list(frame["label"]), [1, 0])


class JournalTests(unittest.IsolatedAsyncioTestCase):
    async def asyncSetUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.journal = Journal(str(Path(self._tmp.name) / "journal.db"))
        await self.journal.connect()

    async def asyncTearDown(self) -> None:
        await self.journal.close()
        self._tmp.cleanup()

    async def test_run_lifecycle(self) -> None:
        run_id = await self.journal.start_run("kernel", "abc123", "0.1.0")
        await self.journal.record_step(run_id, "data", 0.25, "seed=0")
        await self.journal.record_step(run_id, "kernel", 1.5)
        await self.journal.finish_run(run_id, "ok", 2.0)

        steps = await self.journal.get_steps(run_id)
        self.assertEqual(steps, [("data", 0.25, "seed=0"), ("kernel", 1.5, None)])
        runs = await self.journal.get_runs()
        self.assertEqual(runs[0][:5], (run_id, "kernel", "abc123", "0.1.0", "ok"))

    async def test_stats(self) -> None:
        ok = await self.journal.start_run("kernel", "h", "0.1.0")
        await self.journal.finish_run(ok, "ok", 1.0)
        bad = await self.journal.start_run("compare", "h", "0.1.0")
        await self.journal.finish_run(bad, "failed", 0.5)
        await self.journal.start_run("sweep-widths", "h", "0.1.0")
        await self.journal.record_step(ok, "kernel", 1.0)

        stats = await self.journal.get_stats()
        self.assertEqual((stats.runs, stats.succeeded, stats.failed, stats.steps), (3, 1, 1, 1))
        self.assertAlmostEqual(stats.wall_seconds, 1.5)

    async def test_recent_runs_first(self) -> None:
        first = await self.journal.start_run("kernel", "h", "0.1.0")
        second = await self.journal.start_run("compare", "h", "0.1.0")
        runs = await self.journal.get_runs(limit=1)
        self.assertEqual([row[0] for row in runs], [second])
        self.assertNotEqual(first, second)

    async def test_reconnect_keeps_history(self) -> None:
        await self.journal.start_run("kernel", "h", "0.1.0")
        await self.journal.close()
        await self.journal.connect()
        self.assertEqual((await self.journal.get_stats()).runs, 1)


if __name__ == "__main__":
    unittest.main()
