"""Contrastive training of the projection scorer.

The objective treats the batch's normalized similarity matrix as logits:
each diagonal entry is a positive whose cross-entropy denominator pools
every off-diagonal entry of the whole batch (N^2 - N negatives), not just
its own row. Other positives never appear in a denominator. Gradients are
computed analytically through the loss, the normalization's mean terms,
the harmonic score combination, and the token-level max selections
(treated as locally constant index).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .normalize import NormalizationConfig, NormScope, SimilarityTile, normalize
from .scoring import ScorerParams, load_params, save_params  # noqa: F401  (trainer surface)
from .store import TokenEmbeddingSet

__all__ = [
    "TrainerConfig",
    "LossReport",
    "global_inbatch_loss",
    "global_inbatch_loss_with_grad",
    "onedim_inbatch_loss",
    "batch_loss_and_grad",
    "train",
    "ScorerParams",
    "save_params",
    "load_params",
]


@dataclass(frozen=True)
class TrainerConfig:
    epochs: int = 3
    batch_size: int = 64
    temperature: float = 5.0
    learning_rate: float = 3e-6
    seed: int = 0
    norm: NormalizationConfig = field(
        default_factory=lambda: NormalizationConfig(scope=NormScope.TILE)
    )

    def validate(self) -> None:
        if self.epochs < 1 or self.batch_size < 2:
            raise DataError("epochs must be >= 1 and batch_size >= 2")
        if self.temperature <= 0 or self.learning_rate <= 0:
            raise DataError("temperature and learning_rate must be positive")
        self.norm.validate()


@dataclass(frozen=True)
class LossReport:
    """loss plus the logit bookkeeping: ``negatives`` counts the distinct
    negative logits paired with each positive (N^2 - N for the global
    objective, N - 1 for the one-dimensional baseline)."""

    loss: float
    positives: int
    negatives: int


def _as_square_logits(tile, temperature: float) -> np.ndarray:
    if temperature <= 0:
        raise DataError(f"temperature {temperature} must be positive")
    scores = tile.normalized if isinstance(tile, SimilarityTile) else np.asarray(tile, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != scores.shape[1]:
        raise DataError(f"expected a square tile, got shape {scores.shape}")
    return scores / temperature


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def global_inbatch_loss(tile, temperature: float) -> LossReport:
    """Mean cross-entropy of each positive against all off-diagonal logits."""
    report, _ = global_inbatch_loss_with_grad(tile, temperature)
    return report


def global_inbatch_loss_with_grad(tile, temperature: float) -> tuple[LossReport, np.ndarray]:
    """Loss plus its gradient with respect to the normalized score matrix."""
    logits = _as_square_logits(tile, temperature)
    n = logits.shape[0]
    grad = np.zeros_like(logits)
    if n == 1:
        return LossReport(0.0, 1, 0), grad

    off_diag = ~np.eye(n, dtype=bool)
    neg_logits = logits[off_diag]
    neg_max = neg_logits.max()
    log_z_neg = neg_max + np.log(np.exp(neg_logits - neg_max).sum())

    diag = np.diagonal(logits)
    # per-positive term: log(1 + Z_neg / exp(l_ii))
    margins = log_z_neg - diag
    loss = float(np.logaddexp(0.0, margins).mean())

    sig = _sigmoid(margins)  # probability mass on the negatives, per positive
    neg_softmax = np.zeros_like(logits)
    neg_softmax[off_diag] = np.exp(logits[off_diag] - log_z_neg)
    grad = (sig.mean() / temperature) * neg_softmax
    np.fill_diagonal(grad, -sig / (n * temperature))
    return LossReport(loss, n, n * n - n), grad


def onedim_inbatch_loss(tile, temperature: float) -> LossReport:
    """Standard contrastive baseline: positive i against its own row only."""
    logits = _as_square_logits(tile, temperature)
    n = logits.shape[0]
    if n == 1:
        return LossReport(0.0, 1, 0)
    row_max = logits.max(axis=1, keepdims=True)
    log_z = row_max[:, 0] + np.log(np.exp(logits - row_max).sum(axis=1))
    loss = float((log_z - np.diagonal(logits)).mean())
    return LossReport(loss, n, n - 1)


def _pairwise_scores_with_argmax(x, y, x_off, x_counts, y_off, y_counts):
    """Raw dot-product scores for every sentence pair plus the max locations
    needed to route gradients."""
    dots = x @ y.T
    n_src, n_tgt = len(x_counts), len(y_counts)
    precision = np.empty((n_src, n_tgt))
    recall = np.empty((n_src, n_tgt))
    arg_p = {}  # (i, j) -> source-token row chosen for each target token
    arg_r = {}  # (i, j) -> target-token col chosen for each source token
    for i in range(n_src):
        rows = slice(x_off[i], x_off[i] + x_counts[i])
        for j in range(n_tgt):
            cols = slice(y_off[j], y_off[j] + y_counts[j])
            block = dots[rows, cols]
            ap = block.argmax(axis=0)
            ar = block.argmax(axis=1)
            arg_p[i, j] = ap
            arg_r[i, j] = ar
            precision[i, j] = block[ap, np.arange(block.shape[1])].mean()
            recall[i, j] = block[np.arange(block.shape[0]), ar].mean()
    return precision, recall, arg_p, arg_r


def batch_loss_and_grad(
    src_matrices: list[np.ndarray],
    tgt_matrices: list[np.ndarray],
    params: ScorerParams,
    temperature: float,
    norm: NormalizationConfig,
) -> tuple[LossReport, np.ndarray, SimilarityTile]:
    """Forward and backward pass of the full chain on one aligned batch:
    project -> raw-dot token scores -> in-batch normalize -> global loss.

    Returns the loss report, d loss / d weight, and the normalized tile.
    """
    n = len(src_matrices)
    if n != len(tgt_matrices):
        raise DataError("source and target batch sizes differ")
    x_raw = np.concatenate(src_matrices).astype(np.float64)
    y_raw = np.concatenate(tgt_matrices).astype(np.float64)
    x_counts = np.array([m.shape[0] for m in src_matrices])
    y_counts = np.array([m.shape[0] for m in tgt_matrices])
    x_off = np.concatenate(([0], np.cumsum(x_counts[:-1])))
    y_off = np.concatenate(([0], np.cumsum(y_counts[:-1])))

    x = params.project(x_raw)
    y = params.project(y_raw)
    precision, recall, arg_p, arg_r = _pairwise_scores_with_argmax(
        x, y, x_off, x_counts, y_off, y_counts
    )
    denom = precision + recall
    safe = np.where(denom == 0.0, 1.0, denom)
    f = np.where(denom == 0.0, 0.0, 2.0 * precision * recall / safe)

    tile = normalize(f, norm)
    report, g_s = global_inbatch_loss_with_grad(tile, temperature)

    # adjoint of the normalization (it is linear in the raw scores)
    alpha = norm.alpha
    rows, cols = g_s.shape
    g_f = (
        g_s
        - alpha * (g_s.sum(axis=1)[:, None] / cols + g_s.sum(axis=0)[None, :] / rows)
        + (2.0 * alpha - 1.0) * g_s.sum() / (rows * cols)
    )

    df_dp = np.where(denom == 0.0, 0.0, 2.0 * recall**2 / safe**2)
    df_dr = np.where(denom == 0.0, 0.0, 2.0 * precision**2 / safe**2)
    coef_p = g_f * df_dp / y_counts[None, :]
    coef_r = g_f * df_dr / x_counts[:, None]

    # scatter chain coefficients onto the chosen token pairs
    c = np.zeros((x.shape[0], y.shape[0]))
    for i in range(n):
        for j in range(n):
            tgt_idx = y_off[j] + np.arange(y_counts[j])
            np.add.at(c, (x_off[i] + arg_p[i, j], tgt_idx), coef_p[i, j])
            src_idx = x_off[i] + np.arange(x_counts[i])
            np.add.at(c, (src_idx, y_off[j] + arg_r[i, j]), coef_r[i, j])

    grad_w = x_raw.T @ (c @ y) + y_raw.T @ (c.T @ x)
    return report, grad_w, tile


def _aligned_matrices(
    src_set: TokenEmbeddingSet, tgt_set: TokenEmbeddingSet, gold: dict[str, str] | None
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    if len(src_set) != len(tgt_set):
        raise DataError("source and target sets must have equal size")
    if gold is None:
        return src_set.matrices(), tgt_set.matrices()
    by_id = {e.id: e.matrix for e in tgt_set.entries}
    if sorted(gold) != sorted(src_set.ids()) or sorted(gold.values()) != sorted(by_id):
        raise DataError("gold map is not a bijection over the two sets")
    return src_set.matrices(), [by_id[gold[e.id]] for e in src_set.entries]


def train(
    src_set: TokenEmbeddingSet,
    tgt_set: TokenEmbeddingSet,
    config: TrainerConfig,
    gold: dict[str, str] | None = None,
) -> tuple[ScorerParams, list[float]]:
    """Gradient-descent training over shuffled full batches.

    Pairs align by position unless a gold id map is given. The remainder
    that does not fill a batch is dropped each epoch. Returns the trained
    params and the per-epoch mean loss trace.
    """
    config.validate()
    src_mats, tgt_mats = _aligned_matrices(src_set, tgt_set, gold)
    n_pairs = len(src_mats)
    if n_pairs < config.batch_size:
        raise DataError(
            f"{n_pairs} pairs is fewer than batch_size {config.batch_size}"
        )
    params = ScorerParams.identity(src_set.dim)
    rng = np.random.default_rng(config.seed)
    trace = []
    for _ in range(config.epochs):
        order = rng.permutation(n_pairs)
        losses = []
        for start in range(0, n_pairs - config.batch_size + 1, config.batch_size):
            batch = order[start : start + config.batch_size]
            report, grad_w, _ = batch_loss_and_grad(
                [src_mats[k] for k in batch],
                [tgt_mats[k] for k in batch],
                params,
                config.temperature,
                config.norm,
            )
            params = ScorerParams(
                params.in_dim, params.out_dim, params.weight - config.learning_rate * grad_w
            )
            losses.append(report.loss)
        trace.append(float(np.mean(losses)))
    return params, trace
