"""Ranking evaluation: pick each source sentence's translation out of a
fixed candidate pool by argmax score; report accuracy per language pair,
per language, and overall."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DataError
from .normalize import NormalizationConfig, normalize_matrix
from .scoring import ScoreMode, ScorerParams, score_tile
from .store import TokenEmbeddingSet


@dataclass
class RetrievalTask:
    src_set: TokenEmbeddingSet
    tgt_set: TokenEmbeddingSet
    gold: dict[str, str]
    pair_label: str = "xx-xy"

    def validate(self) -> None:
        if len(self.src_set) != len(self.tgt_set):
            raise DataError(
                f"pool sizes differ: {len(self.src_set)} vs {len(self.tgt_set)}"
            )
        src_ids, tgt_ids = self.src_set.ids(), self.tgt_set.ids()
        if sorted(self.gold) != sorted(src_ids):
            raise DataError("gold does not cover the source pool exactly")
        if sorted(self.gold.values()) != sorted(tgt_ids):
            raise DataError("gold is not a bijection onto the target pool")

    def gold_columns(self) -> np.ndarray:
        col_of = {tid: j for j, tid in enumerate(self.tgt_set.ids())}
        return np.array([col_of[self.gold[sid]] for sid in self.src_set.ids()])


@dataclass
class EvalReport:
    per_pair: dict[str, float]
    per_language: dict[str, float]
    overall: float
    settings: dict = field(default_factory=dict)

    def to_jsonl(self) -> str:
        lines = [
            json.dumps({"pair": label, "accuracy": acc}, sort_keys=True)
            for label, acc in sorted(self.per_pair.items())
        ]
        lines.append(
            json.dumps(
                {
                    "summary": True,
                    "overall": self.overall,
                    "per_language": dict(sorted(self.per_language.items())),
                    "settings": self.settings,
                },
                sort_keys=True,
            )
        )
        return "\n".join(lines) + "\n"

    def render(self) -> str:
        width = max([len(p) for p in self.per_pair] + [7])
        rows = [f"{'pair':<{width}}  accuracy"]
        for label, acc in sorted(self.per_pair.items()):
            rows.append(f"{label:<{width}}  {acc:8.4f}")
        rows.append(f"{'overall':<{width}}  {self.overall:8.4f}")
        return "\n".join(rows)


def accuracy_from_matrix(scores: np.ndarray, gold_cols: np.ndarray) -> float:
    """Fraction of rows whose argmax (ties to the lowest index) is gold."""
    return float((scores.argmax(axis=1) == gold_cols).mean())


def evaluate_retrieval(
    task: RetrievalTask,
    mode: ScoreMode = ScoreMode.EVAL_COSINE,
    norm: NormalizationConfig | None = NormalizationConfig(),
    params: ScorerParams | None = None,
    bidirectional: bool = False,
) -> float:
    """Accuracy of source-to-target argmax retrieval over the full pool.

    ``norm=None`` skips normalization. ``bidirectional`` averages in the
    reverse direction (off by default, matching the usual convention).
    """
    task.validate()
    raw = score_tile(task.src_set.entries, task.tgt_set.entries, mode, params)
    forward = accuracy_from_matrix(normalize_matrix(raw, norm), task.gold_columns())
    if not bidirectional:
        return forward
    reverse = accuracy_from_matrix(
        normalize_matrix(raw.T, norm), _inverse_gold_rows(task)
    )
    return 0.5 * (forward + reverse)


def _inverse_gold_rows(task: RetrievalTask) -> np.ndarray:
    row_of = {sid: i for i, sid in enumerate(task.src_set.ids())}
    inverse = {tgt: src for src, tgt in task.gold.items()}
    return np.array([row_of[inverse[tid]] for tid in task.tgt_set.ids()])


def languages_of(pair_label: str) -> list[str]:
    return pair_label.split("-")


def aggregate(per_pair: dict[str, float] | Iterable[tuple[str, float]],
              settings: dict | None = None) -> EvalReport:
    """Combine per-pair accuracies: a language's accuracy is the mean over
    all pairs that involve it; overall is the unweighted mean over pairs."""
    per_pair = dict(per_pair)
    if not per_pair:
        raise DataError("no pair results to aggregate")
    by_language: dict[str, list[float]] = {}
    for label, acc in per_pair.items():
        for lang in languages_of(label):
            by_language.setdefault(lang, []).append(acc)
    per_language = {lang: float(np.mean(v)) for lang, v in by_language.items()}
    overall = float(np.mean(list(per_pair.values())))
    return EvalReport(per_pair, per_language, overall, settings or {})
