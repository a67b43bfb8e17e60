"""Token-embedding container: in-memory types plus binary (de)serialization.

Container layout (all integers little-endian):

    magic   4 bytes  b"TEMB"
    version u16      currently 1
    dtype   u8       1 = float32
    dim     u32      embedding width
    count   u64      number of sentence records
    record: id_len u16, id bytes (UTF-8), token_count u32,
            token_count * dim float32 values, row-major

A sidecar manifest (JSON lines, one object per sentence) carries metadata
the binary container does not: ``id``, ``lang``, optional ``text`` and
``tokens`` (subword count, consumed by the corpus filter).
"""

from __future__ import annotations

import io
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable

import numpy as np

from .errors import DataError, FormatError

logger = logging.getLogger(__name__)

MAGIC = b"TEMB"
VERSION = 1
DTYPE_F32 = 1
MAX_SEQ_LEN = 100

_HEADER = struct.Struct("<4sHBIQ")
_ID_LEN = struct.Struct("<H")
_TOKEN_COUNT = struct.Struct("<I")


@dataclass
class SentenceEmbedding:
    """One sentence: an id and a (token_count x dim) float32 matrix."""

    id: str
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if self.matrix.ndim != 2:
            raise DataError(f"sentence {self.id!r}: matrix must be 2-D")

    @property
    def token_count(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SentenceEmbedding):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.matrix, other.matrix)


@dataclass
class TokenEmbeddingSet:
    """Ordered collection of sentence embeddings sharing one width.

    ``language`` and ``provenance`` are metadata: they travel in the sidecar
    manifest, not the binary container, and do not participate in equality.
    """

    dim: int
    entries: list[SentenceEmbedding]
    language: str = field(default="und", compare=False)
    provenance: str = field(default="unknown", compare=False)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TokenEmbeddingSet):
            return NotImplemented
        return self.dim == other.dim and self.entries == other.entries

    def matrices(self) -> list[np.ndarray]:
        return [e.matrix for e in self.entries]

    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def validate(self, max_seq_len: int = MAX_SEQ_LEN) -> None:
        """Raise DataError on any invariant violation."""
        if self.dim <= 0:
            raise DataError("dim must be positive")
        seen: set[str] = set()
        for entry in self.entries:
            if entry.id in seen:
                raise DataError(f"duplicate sentence id {entry.id!r}")
            seen.add(entry.id)
            if entry.dim != self.dim:
                raise DataError(
                    f"sentence {entry.id!r}: width {entry.dim} != set dim {self.dim}"
                )
            if not 1 <= entry.token_count <= max_seq_len:
                raise DataError(
                    f"sentence {entry.id!r}: token count {entry.token_count} "
                    f"outside [1, {max_seq_len}]"
                )
            if not np.isfinite(entry.matrix).all():
                raise DataError(f"sentence {entry.id!r}: non-finite values")


def _as_writer(destination) -> tuple[BinaryIO, bool]:
    if isinstance(destination, (str, Path)):
        return open(destination, "wb"), True
    return destination, False


def _as_reader(source) -> tuple[BinaryIO, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "rb"), True
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(source), True
    return source, False


def write_embedding_set(embedding_set: TokenEmbeddingSet, destination) -> int:
    """Serialize a set to ``destination`` (path or binary sink).

    The set is validated before any bytes are written. Returns the number
    of bytes emitted.
    """
    embedding_set.validate()
    sink, owned = _as_writer(destination)
    written = 0
    try:
        written += sink.write(
            _HEADER.pack(MAGIC, VERSION, DTYPE_F32, embedding_set.dim, len(embedding_set))
        )
        for entry in embedding_set.entries:
            id_bytes = entry.id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise DataError(f"sentence id too long ({len(id_bytes)} bytes)")
            written += sink.write(_ID_LEN.pack(len(id_bytes)))
            written += sink.write(id_bytes)
            written += sink.write(_TOKEN_COUNT.pack(entry.token_count))
            written += sink.write(entry.matrix.astype("<f4", copy=False).tobytes())
    finally:
        if owned:
            sink.close()
    return written


def serialized_size(embedding_set: TokenEmbeddingSet) -> int:
    """Byte count write_embedding_set would produce, from the layout alone."""
    total = _HEADER.size
    for entry in embedding_set.entries:
        total += _ID_LEN.size + len(entry.id.encode("utf-8")) + _TOKEN_COUNT.size
        total += 4 * entry.token_count * embedding_set.dim
    return total


def _read_exact(stream: BinaryIO, n: int, context: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise FormatError(f"truncated {context}")
    return data


def read_embedding_set(
    source,
    language: str = "und",
    provenance: str = "unknown",
    max_seq_len: int = MAX_SEQ_LEN,
) -> TokenEmbeddingSet:
    """Parse a container from ``source`` (path, bytes, or binary stream).

    Sentences longer than ``max_seq_len`` are truncated with a warning.
    Rejects bad magic, unsupported versions, truncation, non-finite values.
    """
    stream, owned = _as_reader(source)
    try:
        header = _read_exact(stream, _HEADER.size, "header")
        magic, version, dtype, dim, count = _HEADER.unpack(header)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        if dtype != DTYPE_F32:
            raise FormatError(f"unsupported dtype tag {dtype}")
        entries = []
        truncated = 0
        for index in range(count):
            try:
                (id_len,) = _ID_LEN.unpack(_read_exact(stream, _ID_LEN.size, "record"))
                sid = _read_exact(stream, id_len, "record").decode("utf-8")
                (token_count,) = _TOKEN_COUNT.unpack(
                    _read_exact(stream, _TOKEN_COUNT.size, "record")
                )
                payload = _read_exact(stream, 4 * token_count * dim, "record")
            except FormatError:
                raise FormatError(f"truncated record {index}") from None
            matrix = np.frombuffer(payload, dtype="<f4").reshape(token_count, dim)
            if not np.isfinite(matrix).all():
                raise FormatError(f"record {index} ({sid!r}): non-finite values")
            if token_count > max_seq_len:
                matrix = matrix[:max_seq_len]
                truncated += 1
            entries.append(SentenceEmbedding(sid, matrix))
        if truncated:
            logger.warning(
                "truncated %d sentence(s) to max_seq_len=%d", truncated, max_seq_len
            )
        result = TokenEmbeddingSet(dim, entries, language=language, provenance=provenance)
        result.validate(max_seq_len)
        return result
    finally:
        if owned:
            stream.close()


def write_manifest(records: Iterable[dict], destination) -> None:
    """Write sidecar manifest records as JSON lines."""
    sink, owned = (
        (open(destination, "w", encoding="utf-8"), True)
        if isinstance(destination, (str, Path))
        else (destination, False)
    )
    try:
        for record in records:
            sink.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
            sink.write("\n")
    finally:
        if owned:
            sink.close()


def read_manifest(source) -> list[dict]:
    path = Path(source)
    records = []
    with path.open("r", encoding="utf-8") as stream:
        for lineno, line in enumerate(stream, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: bad manifest line") from exc
    return records


def save_set(embedding_set: TokenEmbeddingSet, path, texts: dict[str, str] | None = None) -> int:
    """Write container plus sidecar manifest (``<path>.manifest.jsonl``)."""
    path = Path(path)
    count = write_embedding_set(embedding_set, path)
    records = []
    for entry in embedding_set.entries:
        record = {"id": entry.id, "lang": embedding_set.language, "tokens": entry.token_count}
        if texts and entry.id in texts:
            record["text"] = texts[entry.id]
        records.append(record)
    write_manifest(records, path.with_name(path.name + ".manifest.jsonl"))
    return count


def load_set(path, provenance: str | None = None) -> TokenEmbeddingSet:
    """Read container, pulling language from the sidecar manifest if present."""
    path = Path(path)
    language = "und"
    manifest = path.with_name(path.name + ".manifest.jsonl")
    if manifest.exists():
        records = read_manifest(manifest)
        langs = {r.get("lang") for r in records if r.get("lang")}
        if len(langs) == 1:
            language = langs.pop()
    return read_embedding_set(
        path, language=language, provenance=provenance or str(path)
    )
