"""Seeded synthetic multilingual embeddings for tests and simulations.

The generator models a pair of languages sharing a semantic subspace
(the first ``semantic_dim`` coordinates). Source tokens live in that
subspace; the gold target for each sentence is the source token matrix
mapped through a seeded orthogonal map (identity on the semantic block,
a random rotation on the language-specific complement) plus Gaussian
noise. A configurable fraction of target sentences additionally receives
a constant offset along a shared axis, reproducing the tendency of some
sentences to score high against everything.

All draws flow from ``rotation_seed``; output is bit-identical across
runs for equal specs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .store import SentenceEmbedding, TokenEmbeddingSet

# Axis of the shared mean component and of the popularity offset. Kept
# inside the semantic block so every pair of the family shares it.
POPULARITY_AXIS = 0


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    """Parameters of one synthetic language pair.

    tokens_per_sentence is an inclusive (lo, hi) range. semantic_dim
    defaults to dim // 2; junk_sigma scales extra target-only components
    in the language-specific subspace; mean_coeff is the shared positive
    bias along the popularity axis that makes embeddings anisotropic.
    """

    num_pairs: int
    dim: int
    tokens_per_sentence: tuple[int, int]
    rotation_seed: int
    noise_sigma: float = 0.0
    popularity_fraction: float = 0.0
    popularity_offset: float = 0.0
    semantic_dim: int | None = None
    junk_sigma: float = 0.0
    mean_coeff: float = 1.0

    def validate(self) -> None:
        lo, hi = self.tokens_per_sentence
        if self.num_pairs < 1:
            raise DataError("num_pairs must be >= 1")
        if self.dim < 1:
            raise DataError("dim must be >= 1")
        if not 1 <= lo <= hi:
            raise DataError("tokens_per_sentence must satisfy 1 <= lo <= hi")
        if self.noise_sigma < 0 or self.junk_sigma < 0:
            raise DataError("noise scales must be >= 0")
        if not 0.0 <= self.popularity_fraction <= 1.0:
            raise DataError("popularity_fraction must be in [0, 1]")
        k = self.resolved_semantic_dim
        if not 1 <= k <= self.dim:
            raise DataError("semantic_dim must be in [1, dim]")

    @property
    def resolved_semantic_dim(self) -> int:
        return self.semantic_dim if self.semantic_dim is not None else max(1, self.dim // 2)


def rotation_matrix(spec: SyntheticCorpusSpec) -> np.ndarray:
    """The pair's orthogonal map: identity on the semantic block, a seeded
    rotation on the language-specific block."""
    spec.validate()
    k = spec.resolved_semantic_dim
    rotation = np.eye(spec.dim)
    junk = spec.dim - k
    if junk > 0:
        rng = np.random.default_rng(spec.rotation_seed)
        raw = rng.standard_normal((junk, junk))
        q, r = np.linalg.qr(raw)
        q *= np.sign(np.diag(r))  # fix QR sign ambiguity for determinism
        rotation[k:, k:] = q
    return rotation


def generate_synthetic_pair(
    spec: SyntheticCorpusSpec,
) -> tuple[TokenEmbeddingSet, TokenEmbeddingSet, dict[str, str]]:
    """Build (source set, target set, gold id map) for one language pair.

    Target entry order is shuffled so alignment by position is never
    accidentally correct; the gold map is a bijection over ids.
    """
    spec.validate()
    rng = np.random.default_rng(spec.rotation_seed)
    rotation = rotation_matrix(spec)
    k = spec.resolved_semantic_dim
    lo, hi = spec.tokens_per_sentence

    token_counts = rng.integers(lo, hi + 1, size=spec.num_pairs)
    n_popular = int(round(spec.popularity_fraction * spec.num_pairs))
    popular = set(rng.choice(spec.num_pairs, size=n_popular, replace=False).tolist())

    src_entries = []
    tgt_entries = []
    gold: dict[str, str] = {}
    for i in range(spec.num_pairs):
        m = int(token_counts[i])
        source = np.zeros((m, spec.dim))
        source[:, :k] = rng.standard_normal((m, k))
        source[:, POPULARITY_AXIS] += spec.mean_coeff

        target = source.copy()
        if spec.noise_sigma > 0:
            target += spec.noise_sigma * rng.standard_normal((m, spec.dim))
        if spec.junk_sigma > 0 and k < spec.dim:
            target[:, k:] += spec.junk_sigma * rng.standard_normal((m, spec.dim - k))
        if i in popular:
            target[:, POPULARITY_AXIS] += spec.popularity_offset
        target = target @ rotation

        src_id, tgt_id = f"src-{i:05d}", f"tgt-{i:05d}"
        src_entries.append(SentenceEmbedding(src_id, source))
        tgt_entries.append(SentenceEmbedding(tgt_id, target))
        gold[src_id] = tgt_id

    order = rng.permutation(spec.num_pairs)
    tgt_entries = [tgt_entries[j] for j in order]

    src_set = TokenEmbeddingSet(spec.dim, src_entries, language="xx", provenance="synthetic")
    tgt_set = TokenEmbeddingSet(spec.dim, tgt_entries, language="xy", provenance="synthetic")
    return src_set, tgt_set, gold
