from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import structlog

log = structlog.get_logger().bind(component="storage")

MAGIC = b"NTKERN01"
_HEADER = struct.Struct("<8s4Q")


def meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta")


def save_kernel(path: str | Path, matrix: np.ndarray, meta: dict[str, str]) -> Path:
    """Write NTKERN01 + little-endian u64 dims (n, n, P, P) + row-major float64.

    A 2-D matrix is stored with P = 1. ``meta`` goes to ``<path>.meta`` as
    ``key=value`` lines.
    """
    path = Path(path)
    array = np.asarray(matrix, dtype="<f8")
    if array.ndim == 2:
        dims = (*array.shape, 1, 1)
    elif array.ndim == 4:
        dims = array.shape
    else:
        raise ValueError(f"kernel must be 2-D or 4-D, got {array.ndim}-D")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        handle.write(_HEADER.pack(MAGIC, *dims))
        handle.write(np.ascontiguousarray(array).tobytes(order="C"))
    lines = [f"{key}={value}" for key, value in sorted(meta.items())]
    meta_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("kernel written", path=str(path), dims=dims)
    return path


def load_kernel(path: str | Path) -> tuple[np.ndarray, dict[str, str]]:
    """Read a kernel file; 2-D kernels come back as (n, n) matrices."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, *dims = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if payload.size != int(np.prod(dims)):
        raise ValueError(f"{path}: payload size does not match dims {dims}")
    array = payload.reshape(dims)
    if dims[2] == 1 and dims[3] == 1:
        array = array.reshape(dims[0], dims[1])

    meta: dict[str, str] = {}
    sidecar = meta_path(path)
    if sidecar.exists():
        for line in sidecar.read_text(encoding="utf-8").splitlines():
            key, sep, value = line.partition("=")
            if sep:
                meta[key] = value
    return array.astype(np.float64), meta
