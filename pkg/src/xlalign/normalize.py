"""In-batch normalization of similarity matrices.

Subtracts alpha-scaled row and column means from every entry and adds
back a grand-mean correction term, which keeps every normalized batch
centered at zero for any alpha and cancels constant shifts of the input
exactly. Counteracts sentences that score high against everything: a
constant offset on one column is suppressed by the column-mean term
(fully at alpha = 1).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import DataError


class NormScope(enum.Enum):
    POOL = "pool"
    TILE = "tile"


@dataclass(frozen=True)
class NormalizationConfig:
    alpha: float = 0.75
    scope: NormScope = NormScope.POOL
    tile_size: int = 256

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise DataError(f"alpha {self.alpha} outside [0, 1]")
        if self.scope is NormScope.TILE and self.tile_size < 2:
            raise DataError(f"tile_size {self.tile_size} must be >= 2")


@dataclass
class SimilarityTile:
    """A raw score block plus the statistics used to normalize it."""

    raw: np.ndarray
    normalized: np.ndarray
    row_means: np.ndarray
    col_means: np.ndarray
    grand_mean: float
    config: NormalizationConfig


def normalize(raw: np.ndarray, config: NormalizationConfig) -> SimilarityTile:
    """Normalize one batch with its own statistics."""
    config.validate()
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] < 1 or raw.shape[1] < 1:
        raise DataError(f"expected a non-empty 2-D matrix, got shape {raw.shape}")
    if not np.isfinite(raw).all():
        raise DataError("non-finite entries in similarity matrix")
    row_means = raw.mean(axis=1)
    col_means = raw.mean(axis=0)
    grand_mean = float(raw.mean())
    normalized = (
        raw
        - config.alpha * (row_means[:, None] + col_means[None, :])
        + (2.0 * config.alpha - 1.0) * grand_mean
    )
    return SimilarityTile(raw, normalized, row_means, col_means, grand_mean, config)


def normalize_streamed(
    raw: np.ndarray, config: NormalizationConfig
) -> Iterator[tuple[tuple[int, int], SimilarityTile]]:
    """Partition the pool cross-product into contiguous tile_size blocks and
    normalize each independently with its own statistics.

    Approximates pool-scope statistics; blocks must be at least 2x2, so
    pool sides must not leave a remainder of 1.
    """
    config.validate()
    if config.scope is not NormScope.TILE:
        raise DataError("normalize_streamed requires scope=tile")
    raw = np.asarray(raw, dtype=np.float64)
    step = config.tile_size
    for i in range(0, raw.shape[0], step):
        for j in range(0, raw.shape[1], step):
            block = raw[i : i + step, j : j + step]
            if block.shape[0] < 2 or block.shape[1] < 2:
                raise DataError(
                    f"degenerate {block.shape[0]}x{block.shape[1]} tile at ({i}, {j}); "
                    "statistics need at least 2 per side"
                )
            yield (i, j), normalize(block, config)


def normalize_matrix(raw: np.ndarray, config: NormalizationConfig | None) -> np.ndarray:
    """Full normalized matrix under the config's scope; None bypasses
    normalization entirely (normalized = raw)."""
    if config is None:
        return np.asarray(raw, dtype=np.float64)
    if config.scope is NormScope.POOL:
        return normalize(raw, config).normalized
    out = np.empty_like(np.asarray(raw, dtype=np.float64))
    for (i, j), tile in normalize_streamed(raw, config):
        out[i : i + tile.raw.shape[0], j : j + tile.raw.shape[1]] = tile.normalized
    return out
