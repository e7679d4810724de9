"""Small shared helpers: derived random streams and atomic file writes."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["rng_from", "atomic_write_bytes", "atomic_write_text"]


def rng_from(seed: int, *keys: int) -> np.random.Generator:
    """Deterministic generator for a (seed, keys...) coordinate.

    Built on the Philox counter based bit generator, so streams for
    different coordinates are independent and the draw order of one
    stream never influences another.
    """
    seq = np.random.SeedSequence([int(seed)] + [int(k) for k in keys])
    return np.random.Generator(np.random.Philox(seq))


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write via a sibling temporary file and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
