"""Open-set bitext mining: accept candidate pairs whose normalized score
clears a universal threshold, with an F1-optimal threshold sweep against
dev gold. Most sentences in either pool have no counterpart."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .normalize import NormalizationConfig, NormScope, normalize_matrix
from .scoring import ScoreMode, ScorerParams, score_tile
from .store import TokenEmbeddingSet


class CandidateRule(enum.Enum):
    BEST_PER_SOURCE = "best"
    MUTUAL_BEST = "mutual"


@dataclass(frozen=True)
class MiningConfig:
    threshold: float | str = "sweep"
    candidate_rule: CandidateRule = CandidateRule.BEST_PER_SOURCE
    norm: NormalizationConfig | None = field(
        default_factory=lambda: NormalizationConfig(scope=NormScope.TILE)
    )
    mode: ScoreMode = ScoreMode.EVAL_COSINE

    def validate(self) -> None:
        if isinstance(self.threshold, str):
            if self.threshold != "sweep":
                raise DataError(f"threshold must be a number or 'sweep', got {self.threshold!r}")
        elif not math.isfinite(self.threshold):
            raise DataError("fixed threshold must be finite")
        if self.norm is not None:
            self.norm.validate()


@dataclass(frozen=True)
class MinedPair:
    src_id: str
    tgt_id: str
    score: float


@dataclass
class MiningReport:
    predicted: list[MinedPair]
    precision: float
    recall: float
    f1: float
    chosen_threshold: float


def candidate_pairs(
    src_set: TokenEmbeddingSet,
    tgt_set: TokenEmbeddingSet,
    config: MiningConfig,
    params: ScorerParams | None = None,
) -> list[MinedPair]:
    """Score the cross-product and keep candidates per the configured rule,
    ignoring the threshold. Output is ordered by source id."""
    config.validate()
    if not len(src_set) or not len(tgt_set):
        raise DataError("empty mining pool")
    raw = score_tile(src_set.entries, tgt_set.entries, config.mode, params)
    scores = normalize_matrix(raw, config.norm)
    best_tgt = scores.argmax(axis=1)
    if config.candidate_rule is CandidateRule.MUTUAL_BEST:
        best_src = scores.argmax(axis=0)
        rows = [i for i, j in enumerate(best_tgt) if best_src[j] == i]
    else:
        rows = range(len(src_set))
    src_ids, tgt_ids = src_set.ids(), tgt_set.ids()
    pairs = [
        MinedPair(src_ids[i], tgt_ids[best_tgt[i]], float(scores[i, best_tgt[i]]))
        for i in rows
    ]
    return sorted(pairs, key=lambda p: p.src_id)


def mine(
    src_set: TokenEmbeddingSet,
    tgt_set: TokenEmbeddingSet,
    config: MiningConfig,
    params: ScorerParams | None = None,
    gold: set[tuple[str, str]] | None = None,
) -> MiningReport:
    """Mine pairs at the configured threshold; ``threshold='sweep'`` picks
    the F1-optimal threshold against the supplied gold."""
    candidates = candidate_pairs(src_set, tgt_set, config, params)
    if config.threshold == "sweep":
        if gold is None:
            raise DataError("threshold sweep requires gold pairs")
        threshold = sweep_threshold(candidates, gold)
    else:
        threshold = float(config.threshold)
    accepted = [p for p in candidates if p.score >= threshold]
    report = f1_against_gold([(p.src_id, p.tgt_id) for p in accepted], gold or set())
    report.predicted = accepted
    report.chosen_threshold = threshold
    return report


def sweep_threshold(
    candidates: Sequence[MinedPair], gold: set[tuple[str, str]]
) -> float:
    """Threshold maximizing F1 over every distinct candidate score plus
    the infinite sentinels; ties break toward the lower threshold."""
    if not candidates:
        raise DataError("no candidates to sweep")
    ranked = sorted(candidates, key=lambda p: p.score, reverse=True)
    hits = np.cumsum([(p.src_id, p.tgt_id) in gold for p in ranked])
    n_gold = len(gold)

    def f1_at(kept: int) -> float:
        correct = int(hits[kept - 1]) if kept else 0
        precision = correct / kept if kept else (1.0 if n_gold == 0 else 0.0)
        recall = correct / n_gold if n_gold else 1.0
        return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)

    best_threshold, best_f1 = math.inf, f1_at(0)
    for kept_end, pair in enumerate(ranked, start=1):
        # accept everything scoring >= this candidate; skip ahead over ties
        if kept_end < len(ranked) and ranked[kept_end].score == pair.score:
            continue
        score = f1_at(kept_end)
        if score >= best_f1:
            best_f1, best_threshold = score, pair.score
    if f1_at(len(ranked)) >= best_f1:
        best_threshold = -math.inf
    return best_threshold


def f1_against_gold(
    predicted: Iterable[tuple[str, str]], gold: set[tuple[str, str]]
) -> MiningReport:
    """Precision/recall/F1 of a predicted pair set. Empty prediction scores
    precision 1 only when gold is also empty; empty gold means recall 1."""
    pred = set(predicted)
    correct = len(pred & gold)
    if pred:
        precision = correct / len(pred)
    else:
        precision = 1.0 if not gold else 0.0
    recall = correct / len(gold) if gold else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return MiningReport(
        [MinedPair(s, t, float("nan")) for s, t in sorted(pred)],
        precision,
        recall,
        f1,
        float("nan"),
    )


def read_pairs_tsv(path) -> list[tuple[str, str]]:
    pairs = []
    with Path(path).open("r", encoding="utf-8") as stream:
        for lineno, line in enumerate(stream, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise DataError(f"{path}:{lineno}: expected src_id<TAB>tgt_id")
            pairs.append((fields[0], fields[1]))
    return pairs


def write_pairs_tsv(pairs: Iterable[tuple[str, str]], path) -> None:
    with Path(path).open("w", encoding="utf-8") as sink:
        for src_id, tgt_id in pairs:
            sink.write(f"{src_id}\t{tgt_id}\n")
