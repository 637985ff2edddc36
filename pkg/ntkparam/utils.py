from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np

_SEED_MASK = (1 << 64) - 1


def derive_seed(base: int, *labels: int) -> int:
    """Derive an independent 63-bit seed from a base seed and integer labels."""
    sequence = np.random.SeedSequence([base & _SEED_MASK, *labels])
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def canonical_hash(payload: Any) -> str:
    """SHA-256 of the sorted-key JSON form of ``payload``."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def format_duration(seconds: float) -> str:
    """Format seconds into a human-readable duration string."""
    if seconds < 60:
        return f"{seconds:.1f}s"
    seconds = int(seconds)
    minutes, secs = divmod(seconds, 60)
    if minutes < 60:
        return f"{minutes}m {secs}s"
    hours, mins = divmod(minutes, 60)
    if hours < 24:
        return f"{hours}h {mins}m"
    days, hrs = divmod(hours, 24)
    return f"{days}d {hrs}h {mins}m"
