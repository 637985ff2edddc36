from __future__ import annotations

from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd

from ntkparam.finite.training import TRACE_COLUMNS, TrainingTrace
from ntkparam.inference import classify

FLOAT_FORMAT = "%.17g"


def write_rows(path: str | Path, rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> Path:
    """Write result rows as CSV with a header; column order is fixed by ``columns``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_rows(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path)


def write_trace(path: str | Path, trace: TrainingTrace) -> Path:
    rows = []
    for record in trace.records:
        row = asdict(record)
        row["diverged"] = int(record.diverged)
        rows.append(row)
    return write_rows(path, rows, TRACE_COLUMNS)


def write_predictions(path: str | Path, predictions: np.ndarray) -> Path:
    """One row per test point: a score column per class plus the argmax label."""
    columns = [f"class_{k}" for k in range(predictions.shape[1])]
    frame = pd.DataFrame(predictions, columns=columns)
    frame["label"] = classify(predictions)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path
