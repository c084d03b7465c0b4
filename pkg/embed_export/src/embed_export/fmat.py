"""Writer for the FMAT interchange format.

FMAT is a tiny binary format: magic ``FMAT``, little-endian u32 version=1,
u64 rows, u64 cols, then rows*cols IEEE-754 f32 values row-major.  A JSON
sidecar (same path plus ``.json``) carries ``row_ids``, a free-form
``source`` string, and optional ``warnings`` entries.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

FMAT_MAGIC = b"FMAT"
FMAT_VERSION = 1


def write_fmat(
    values: np.ndarray,
    row_ids: list[str],
    path,
    source: str = "",
    warnings: list[dict] | None = None,
) -> None:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != len(row_ids):
        raise ValueError(
            f"need a 2-D matrix with one row id per row, got shape "
            f"{values.shape} and {len(row_ids)} ids"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite feature values")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(FMAT_MAGIC)
        f.write(struct.pack("<I", FMAT_VERSION))
        f.write(struct.pack("<QQ", values.shape[0], values.shape[1]))
        f.write(values.astype("<f4").tobytes(order="C"))
    sidecar: dict = {"row_ids": row_ids, "source": source}
    if warnings:
        sidecar["warnings"] = warnings
    with open(path.with_suffix(path.suffix + ".json"), "w", encoding="utf-8") as f:
        json.dump(sidecar, f)
