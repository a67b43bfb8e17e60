"""Token-level similarity between sentence pairs.

Precision is the mean over target tokens of the best inner product
against any source token; recall mirrors it over source tokens; the
similarity is their harmonic combination. Two modes: evaluation
length-normalizes token vectors first (cosine), training scores raw
dot products.
"""

from __future__ import annotations

import enum
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError
from .store import SentenceEmbedding

logger = logging.getLogger(__name__)

# Peak entries held by one banded token-dot block in score_tile.
_BAND_BUDGET = 4_000_000

PARAMS_MAGIC = b"TSCR"
PARAMS_VERSION = 1
_PARAMS_HEADER = struct.Struct("<4sHII")


class ScoreMode(enum.Enum):
    TRAIN_DOT = "train-dot"
    EVAL_COSINE = "eval-cosine"


@dataclass(frozen=True)
class BertScoreBreakdown:
    precision: float
    recall: float
    f: float


@dataclass
class ScorerParams:
    """Trainable bias-free projection applied to token vectors before scoring."""

    in_dim: int
    out_dim: int
    weight: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.weight.shape != (self.in_dim, self.out_dim):
            raise DataError(
                f"weight shape {self.weight.shape} != ({self.in_dim}, {self.out_dim})"
            )
        if not np.isfinite(self.weight).all():
            raise DataError("non-finite weights")

    @classmethod
    def identity(cls, in_dim: int, out_dim: int | None = None) -> "ScorerParams":
        """Identity for square shapes, truncated identity otherwise."""
        out_dim = in_dim if out_dim is None else out_dim
        return cls(in_dim, out_dim, np.eye(in_dim, out_dim))

    def project(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape[1] != self.in_dim:
            raise DataError(f"matrix width {matrix.shape[1]} != in_dim {self.in_dim}")
        return matrix @ self.weight


def save_params(params: ScorerParams, destination) -> None:
    with open(destination, "wb") as sink:
        sink.write(
            _PARAMS_HEADER.pack(PARAMS_MAGIC, PARAMS_VERSION, params.in_dim, params.out_dim)
        )
        sink.write(params.weight.astype("<f4").tobytes())


def load_params(source) -> ScorerParams:
    data = Path(source).read_bytes()
    if len(data) < _PARAMS_HEADER.size:
        raise FormatError("truncated checkpoint header")
    magic, version, in_dim, out_dim = _PARAMS_HEADER.unpack_from(data)
    if magic != PARAMS_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != PARAMS_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    payload = data[_PARAMS_HEADER.size:]
    expected = 4 * in_dim * out_dim
    if len(payload) != expected:
        raise FormatError("truncated checkpoint payload")
    weight = np.frombuffer(payload, dtype="<f4").reshape(in_dim, out_dim)
    return ScorerParams(in_dim, out_dim, weight.astype(np.float64))


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Length-normalize rows; zero-norm rows stay zero and are reported."""
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    zero = norms == 0.0
    if zero.any():
        logger.warning("%d zero-norm token vector(s) scored as zero", int(zero.sum()))
        norms = np.where(zero, 1.0, norms)
    return matrix / norms


def _combine_f(precision, recall):
    denom = precision + recall
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(denom == 0.0, 0.0, 2.0 * precision * recall / np.where(denom == 0.0, 1.0, denom))
    return f


def bert_score(
    a: SentenceEmbedding, b: SentenceEmbedding, mode: ScoreMode
) -> BertScoreBreakdown:
    """Score one sentence pair. Symmetric: swapping a and b exchanges
    precision and recall and leaves f unchanged.

    The harmonic combination has a pole where precision + recall crosses
    zero; it is defined as 0 at exactly zero and is otherwise reported
    as computed.
    """
    if a.dim != b.dim:
        raise DataError(f"dimension mismatch: {a.dim} != {b.dim}")
    left = np.asarray(a.matrix, dtype=np.float64)
    right = np.asarray(b.matrix, dtype=np.float64)
    if mode is ScoreMode.EVAL_COSINE:
        left = normalize_rows(left)
        right = normalize_rows(right)
    dots = left @ right.T
    precision = float(dots.max(axis=0).mean())
    recall = float(dots.max(axis=1).mean())
    return BertScoreBreakdown(precision, recall, float(_combine_f(precision, recall)))


def _stack(entries: list[SentenceEmbedding], params: ScorerParams | None, mode: ScoreMode):
    dims = {e.dim for e in entries}
    if len(dims) != 1:
        raise DataError(f"inconsistent embedding widths: {sorted(dims)}")
    tokens = np.concatenate([e.matrix for e in entries]).astype(np.float64)
    if params is not None:
        tokens = params.project(tokens)
    if mode is ScoreMode.EVAL_COSINE:
        tokens = normalize_rows(tokens)
    counts = np.array([e.token_count for e in entries])
    offsets = np.zeros(len(entries), dtype=np.intp)
    np.cumsum(counts[:-1], out=offsets[1:])
    return tokens, counts, offsets


def score_tile(
    src: list[SentenceEmbedding],
    tgt: list[SentenceEmbedding],
    mode: ScoreMode,
    params: ScorerParams | None = None,
) -> np.ndarray:
    """All-pairs similarity matrix, entry (i, j) = bert_score(src[i], tgt[j]).f.

    One matrix product per source band, then grouped max/mean reductions;
    matches the per-pair path within 1e-5 absolute.
    """
    if not src or not tgt:
        raise DataError("empty sentence list")
    x, x_counts, x_off = _stack(src, params, mode)
    y, y_counts, y_off = _stack(tgt, params, mode)
    if x.shape[1] != y.shape[1]:
        raise DataError(f"dimension mismatch: {x.shape[1]} != {y.shape[1]}")

    n_tgt_tokens = y.shape[0]
    band_tokens = max(int(x_counts.max()), _BAND_BUDGET // max(1, n_tgt_tokens))

    precision = np.empty((len(src), len(tgt)))
    recall = np.empty((len(src), len(tgt)))
    row = 0
    while row < len(src):
        row_end = row + 1
        while (
            row_end < len(src)
            and x_off[row_end] + x_counts[row_end] - x_off[row] <= band_tokens
        ):
            row_end += 1
        lo, hi = x_off[row], x_off[row_end - 1] + x_counts[row_end - 1]
        dots = x[lo:hi] @ y.T
        band_off = (x_off[row:row_end] - lo).astype(np.intp)

        # (src token, tgt sentence) maxima -> mean per src sentence = recall
        best_per_tgt = np.maximum.reduceat(dots, y_off, axis=1)
        recall[row:row_end] = (
            np.add.reduceat(best_per_tgt, band_off, axis=0) / x_counts[row:row_end, None]
        )
        # (src sentence, tgt token) maxima -> mean per tgt sentence = precision
        best_per_src = np.maximum.reduceat(dots, band_off, axis=0)
        precision[row:row_end] = np.add.reduceat(best_per_src, y_off, axis=1) / y_counts
        row = row_end

    return _combine_f(precision, recall)
