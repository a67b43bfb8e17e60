"""Writer for the TEMB token-embedding container and its sidecar manifest.

This mirrors the consumer's documented wire format and is the only coupling
between the exporter and the alignment engine:

    magic   4 bytes  b"TEMB"
    version u16      1
    dtype   u8       1 = float32
    dim     u32
    count   u64
    record: id_len u16, id UTF-8, token_count u32,
            token_count * dim little-endian float32, row-major

Manifest: JSON lines with ``id``, ``lang``, ``text``, ``tokens``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

_HEADER = struct.Struct("<4sHBIQ")


class ExportError(Exception):
    pass


def write_temb(records: Sequence[tuple[str, np.ndarray]], dim: int, destination) -> int:
    """Write (id, token matrix) records; returns the byte count."""
    for sid, matrix in records:
        if matrix.ndim != 2 or matrix.shape[1] != dim:
            raise ExportError(f"record {sid!r}: expected (tokens, {dim}) matrix")
        if matrix.shape[0] < 1:
            raise ExportError(f"record {sid!r}: no token rows")
        if not np.isfinite(matrix).all():
            raise ExportError(f"record {sid!r}: non-finite hidden states")
    written = 0
    with open(destination, "wb") as sink:
        written += sink.write(_HEADER.pack(b"TEMB", 1, 1, dim, len(records)))
        for sid, matrix in records:
            encoded = sid.encode("utf-8")
            written += sink.write(struct.pack("<H", len(encoded)))
            written += sink.write(encoded)
            written += sink.write(struct.pack("<I", matrix.shape[0]))
            written += sink.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())
    return written


def write_manifest(records: Iterable[dict], destination) -> None:
    with Path(destination).open("w", encoding="utf-8") as sink:
        for record in records:
            sink.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def manifest_path_for(temb_path) -> Path:
    temb_path = Path(temb_path)
    return temb_path.with_name(temb_path.name + ".manifest.jsonl")
