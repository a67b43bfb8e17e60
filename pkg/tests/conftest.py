"""Shared fixtures and independent scalar oracles.

The oracles deliberately use plain Python loops (no numpy reductions) so
they stay independent of the vectorized paths they check.
"""

import math

import numpy as np
import pytest

from xlalign.store import SentenceEmbedding, TokenEmbeddingSet


def make_set(seed, n_sentences=4, dim=3, max_tokens=5, prefix="s", language="xx"):
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n_sentences):
        tokens = int(rng.integers(1, max_tokens + 1))
        entries.append(
            SentenceEmbedding(f"{prefix}{i}", rng.normal(size=(tokens, dim)).astype(np.float32))
        )
    return TokenEmbeddingSet(dim, entries, language=language, provenance="test")


@pytest.fixture
def small_set():
    return make_set(seed=0)


# ---------------------------------------------------------------- oracles


def scalar_bert_score(a_rows, b_rows, cosine):
    """Loop-only precision/recall/f over two lists of token vectors."""

    def norm(v):
        return math.sqrt(sum(x * x for x in v))

    def unit(rows):
        out = []
        for r in rows:
            n = norm(r)
            out.append([x / n for x in r] if n else list(r))
        return out

    if cosine:
        a_rows, b_rows = unit(a_rows), unit(b_rows)
    dots = [[sum(x * y for x, y in zip(a, b)) for b in b_rows] for a in a_rows]
    precision = sum(max(dots[i][j] for i in range(len(a_rows))) for j in range(len(b_rows)))
    precision /= len(b_rows)
    recall = sum(max(row) for row in dots) / len(a_rows)
    f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f


def scalar_normalize(f_rows, alpha):
    """Loop-only in-batch normalization."""
    m, n = len(f_rows), len(f_rows[0])
    row_means = [sum(row) / n for row in f_rows]
    col_means = [sum(f_rows[i][j] for i in range(m)) / m for j in range(n)]
    grand = sum(sum(row) for row in f_rows) / (m * n)
    return [
        [
            f_rows[i][j]
            - alpha * (row_means[i] + col_means[j])
            + (2 * alpha - 1) * grand
            for j in range(n)
        ]
        for i in range(m)
    ]


def scalar_global_loss(scores, tau):
    """Loop-only global in-batch-negative cross-entropy."""
    n = len(scores)
    if n == 1:
        return 0.0
    neg = [
        math.exp(scores[a][b] / tau) for a in range(n) for b in range(n) if a != b
    ]
    total = 0.0
    for i in range(n):
        pos = math.exp(scores[i][i] / tau)
        total += -math.log(pos / (pos + sum(neg)))
    return total / n


def scalar_onedim_loss(scores, tau):
    n = len(scores)
    if n == 1:
        return 0.0
    total = 0.0
    for i in range(n):
        denom = sum(math.exp(scores[i][j] / tau) for j in range(n))
        total += -math.log(math.exp(scores[i][i] / tau) / denom)
    return total / n


def brute_force_best_f1(candidates, gold):
    """Exhaustive threshold scan, reimplemented independently of the sweep."""
    thresholds = [-math.inf, math.inf] + [c.score for c in candidates]
    best = 0.0
    for threshold in thresholds:
        pred = {(c.src_id, c.tgt_id) for c in candidates if c.score >= threshold}
        correct = len(pred & gold)
        precision = correct / len(pred) if pred else (1.0 if not gold else 0.0)
        recall = correct / len(gold) if gold else 1.0
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        best = max(best, f1)
    return best


def fd_instance(seed, n_pairs=6, dim=5, min_margin=1e-2):
    """Random aligned batch plus a near-identity weight whose projected max
    selections all have comfortable margins, so finite differences stay
    inside the locally-linear region."""
    rng = np.random.default_rng(seed)
    while True:
        src = [rng.normal(0.5, 1.0, size=(int(rng.integers(2, 5)), dim)) for _ in range(n_pairs)]
        tgt = [m + 0.25 * rng.normal(size=m.shape) for m in src]
        weight = np.eye(dim) + 0.05 * rng.normal(size=(dim, dim))
        projected_src = [m @ weight for m in src]
        projected_tgt = [m @ weight for m in tgt]
        if _margins_ok(projected_src, projected_tgt, min_margin):
            return src, tgt, weight


def _margins_ok(src, tgt, min_margin):
    for a in src:
        for b in tgt:
            dots = a @ b.T
            for axis in (0, 1):
                if dots.shape[axis] > 1:
                    top2 = np.sort(dots, axis=axis)
                    gap = top2.take(-1, axis=axis) - top2.take(-2, axis=axis)
                    if gap.min() < min_margin:
                        return False
    return True


def central_difference(loss_fn, weight, step=1e-4):
    grad = np.zeros_like(weight)
    for u in range(weight.shape[0]):
        for v in range(weight.shape[1]):
            bumped = weight.copy()
            bumped[u, v] += step
            upper = loss_fn(bumped)
            bumped[u, v] -= 2 * step
            lower = loss_fn(bumped)
            grad[u, v] = (upper - lower) / (2 * step)
    return grad
