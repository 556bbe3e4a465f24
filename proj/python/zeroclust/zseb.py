"""Pure-Python reader and writer for embedding bank directories.

A bank directory holds ``embeddings.zseb`` (little-endian header followed by
row-major float32 values) and ``manifest.jsonl`` (one JSON object per row).
Nothing here depends on the compiled extension.
"""

from __future__ import annotations

import json
import math
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ZSEB"
VERSION = 1
DTYPE_F32 = 0
HEADER = struct.Struct("<4sHBBQI")
EMBEDDINGS_FILE = "embeddings.zseb"
MANIFEST_FILE = "manifest.jsonl"
SIDECAR_FILE = "bank.json"
MANIFEST_KEYS = ("image_id", "species", "taxon_class", "source_code", "location_id", "validated")


class ZsebError(ValueError):
    pass


def _parse_header(raw: bytes) -> tuple[int, int]:
    if len(raw) < HEADER.size:
        raise ZsebError(f"header is {len(raw)} bytes, expected {HEADER.size}")
    magic, version, dtype, reserved, n_rows, dim = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ZsebError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ZsebError(f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise ZsebError(f"unsupported dtype {dtype}")
    if reserved != 0:
        raise ZsebError("reserved byte is not zero")
    return n_rows, dim


def read_zseb(path: str | os.PathLike) -> np.ndarray:
    raw = Path(path).read_bytes()
    n_rows, dim = _parse_header(raw)
    expected = HEADER.size + 4 * n_rows * dim
    if len(raw) != expected:
        raise ZsebError(f"file is {len(raw)} bytes, header implies {expected}")
    return np.frombuffer(raw, dtype="<f4", offset=HEADER.size).reshape(n_rows, dim).copy()


def write_zseb(path: str | os.PathLike, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise ZsebError(f"expected a 2-D array, got {values.ndim}-D")
    if not np.isfinite(values).all():
        raise ZsebError("non-finite values")
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, VERSION, DTYPE_F32, 0, values.shape[0], values.shape[1]))
        f.write(values.tobytes())


def read_manifest(path: str | os.PathLike) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_manifest(path: str | os.PathLike, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            row = {k: r.get(k) for k in MANIFEST_KEYS}
            row["source_code"] = row["source_code"] or ""
            row["validated"] = True if row["validated"] is None else bool(row["validated"])
            f.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")) + "\n")


def write_bank(directory: str | os.PathLike, values: np.ndarray, records: list[dict],
               sidecar: dict | None = None) -> Path:
    directory = Path(directory)
    if len(records) != np.shape(values)[0]:
        raise ZsebError(f"{len(records)} manifest records for {np.shape(values)[0]} rows")
    directory.mkdir(parents=True, exist_ok=True)
    write_zseb(directory / EMBEDDINGS_FILE, values)
    write_manifest(directory / MANIFEST_FILE, records)
    if sidecar:
        (directory / SIDECAR_FILE).write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    return directory


def read_bank(directory: str | os.PathLike) -> tuple[np.ndarray, list[dict]]:
    directory = Path(directory)
    values = read_zseb(directory / EMBEDDINGS_FILE)
    records = read_manifest(directory / MANIFEST_FILE)
    if len(records) != values.shape[0]:
        raise ZsebError(f"{len(records)} manifest records for {values.shape[0]} rows")
    return values, records


def verify_format(directory: str | os.PathLike) -> bool:
    """True iff the header, sizes and finiteness checks all pass."""
    try:
        directory = Path(directory)
        raw = (directory / EMBEDDINGS_FILE).read_bytes()
        n_rows, dim = _parse_header(raw)
        if len(raw) != HEADER.size + 4 * n_rows * dim:
            return False
        for (value,) in struct.iter_unpack("<f", raw[HEADER.size:]):
            if not math.isfinite(value):
                return False
        with open(directory / MANIFEST_FILE, encoding="utf-8") as f:
            rows = [json.loads(line) for line in f if line.strip()]
        return len(rows) == n_rows and all(isinstance(r, dict) and "image_id" in r for r in rows)
    except (OSError, ValueError, struct.error):
        return False
