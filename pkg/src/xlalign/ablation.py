"""Pooling-versus-normalization ablation grid over retrieval tasks.

Compares mean-pooled cosine against token-level max-mean scoring, with
normalization on or off, across alphas and seeds. Directional harness:
the interesting output is the ordering of cells, not absolute numbers.
"""

from __future__ import annotations

import enum
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .normalize import NormalizationConfig, normalize_matrix
from .retrieval import RetrievalTask, accuracy_from_matrix
from .scoring import ScoreMode, normalize_rows, score_tile
from .store import SentenceEmbedding
from .synthetic import SyntheticCorpusSpec, generate_synthetic_pair


class PoolingMethod(enum.Enum):
    AVG_POOL_COSINE = "avg-pool"
    BERT_SCORE = "bert-score"


def avg_pool_similarity(a: SentenceEmbedding, b: SentenceEmbedding) -> float:
    """Cosine of the two token-mean vectors (0 if either pools to zero)."""
    if a.dim != b.dim:
        raise DataError(f"dimension mismatch: {a.dim} != {b.dim}")
    tile = avg_pool_tile([a], [b])
    return float(tile[0, 0])


def avg_pool_tile(src: list[SentenceEmbedding], tgt: list[SentenceEmbedding]) -> np.ndarray:
    pooled_src = normalize_rows(np.stack([e.matrix.mean(axis=0) for e in src]).astype(np.float64))
    pooled_tgt = normalize_rows(np.stack([e.matrix.mean(axis=0) for e in tgt]).astype(np.float64))
    return pooled_src @ pooled_tgt.T


@dataclass
class AblationGrid:
    pooling: list[PoolingMethod]
    normalization: list[bool]
    alphas: list[float]
    seeds: list[int]
    tasks: list[tuple[str, RetrievalTask | SyntheticCorpusSpec]]

    def validate(self) -> None:
        for axis, name in [
            (self.pooling, "pooling"),
            (self.normalization, "normalization"),
            (self.alphas, "alphas"),
            (self.seeds, "seeds"),
            (self.tasks, "tasks"),
        ]:
            if not axis:
                raise DataError(f"empty grid axis: {name}")


def _resolve_task(source, seed: int) -> RetrievalTask:
    if isinstance(source, RetrievalTask):
        return source
    spec = replace(source, rotation_seed=seed)
    src_set, tgt_set, gold = generate_synthetic_pair(spec)
    return RetrievalTask(src_set, tgt_set, gold, f"{src_set.language}-{tgt_set.language}")


def evaluate_cell(
    task: RetrievalTask,
    pooling: PoolingMethod,
    normalized: bool,
    alpha: float,
) -> float:
    task.validate()
    if pooling is PoolingMethod.BERT_SCORE:
        raw = score_tile(task.src_set.entries, task.tgt_set.entries, ScoreMode.EVAL_COSINE)
    else:
        raw = avg_pool_tile(task.src_set.entries, task.tgt_set.entries)
    config = NormalizationConfig(alpha=alpha) if normalized else None
    return accuracy_from_matrix(normalize_matrix(raw, config), task.gold_columns())


def run_grid(grid: AblationGrid, jobs: int = 1) -> list[dict]:
    """Evaluate every cell; rows are JSON-ready dicts in a fixed order
    independent of execution order."""
    grid.validate()
    cells = []
    for pooling in grid.pooling:
        for normalized in grid.normalization:
            for alpha in grid.alphas if normalized else [None]:
                for seed in grid.seeds:
                    for label, source in grid.tasks:
                        cells.append((pooling, normalized, alpha, seed, label, source))

    def run(cell):
        pooling, normalized, alpha, seed, label, source = cell
        task = _resolve_task(source, seed)
        accuracy = evaluate_cell(task, pooling, normalized, alpha if alpha is not None else 0.0)
        return {
            "pooling": pooling.value,
            "normalized": normalized,
            "alpha": alpha,
            "seed": seed,
            "task": label,
            "accuracy": accuracy,
        }

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, cells))
    return [run(cell) for cell in cells]


def render_grid(rows: list[dict]) -> str:
    """Aggregate to a small text table: one line per (pooling, norm, alpha)
    averaged over seeds and tasks."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        key = (row["pooling"], row["normalized"], row["alpha"])
        groups.setdefault(key, []).append(row["accuracy"])
    lines = [f"{'pooling':<12} {'norm':<5} {'alpha':>5}  {'mean acc':>8}  cells"]
    for (pooling, normalized, alpha), accs in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] if kv[0][2] is not None else -1)
    ):
        alpha_text = f"{alpha:.2f}" if alpha is not None else "-"
        lines.append(
            f"{pooling:<12} {str(normalized).lower():<5} {alpha_text:>5}  "
            f"{float(np.mean(accs)):8.4f}  {len(accs)}"
        )
    return "\n".join(lines)


def rows_to_jsonl(rows: list[dict]) -> str:
    return "\n".join(json.dumps(row, sort_keys=True) for row in rows) + "\n"
