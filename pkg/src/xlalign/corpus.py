"""Training-data preparation: fixed example budget across language pairs,
short-sentence filtering after sampling, exact-match decontamination
against evaluation sets, and top-k pair selection by availability."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import DataError

_WS_RUN = re.compile(r"\s+")

DEFAULT_BUDGET = 1_000_000
DEFAULT_MIN_TOKENS = 5


@dataclass(frozen=True)
class BitextPair:
    id: str
    src_text: str
    tgt_text: str
    pair_label: str


@dataclass
class BitextCorpus:
    pairs: list[BitextPair]
    # per-pair (src, tgt) subword counts from the producer manifest, if any
    token_counts: list[tuple[int, int]] | None = None

    def __post_init__(self):
        if self.token_counts is not None and len(self.token_counts) != len(self.pairs):
            raise DataError("token_counts length does not match pairs")
        for pair in self.pairs:
            if not pair.src_text or not pair.tgt_text:
                raise DataError(f"pair {pair.id!r}: empty text")
            if not re.fullmatch(r"[A-Za-z0-9]{2,8}-[A-Za-z0-9]{2,8}", pair.pair_label):
                raise DataError(f"malformed pair label {pair.pair_label!r}")

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class BudgetSpec:
    total_budget: int = DEFAULT_BUDGET
    pair_labels: tuple[str, ...] = ()
    min_tokens: int = DEFAULT_MIN_TOKENS
    seed: int = 0

    def validate(self) -> None:
        if self.total_budget < 1:
            raise DataError("total_budget must be >= 1")
        if self.min_tokens < 0:
            raise DataError("min_tokens must be >= 0")


def _allocate(sizes: list[int], budget: int) -> list[int]:
    """Equal split with round-robin redistribution of the leftover to pairs
    that still have data. Allocates min(budget, sum(sizes)) in total."""
    k = len(sizes)
    alloc = [min(size, budget // k) for size in sizes]
    leftover = budget - sum(alloc)
    capacity = [size - got for size, got in zip(sizes, alloc)]
    while leftover > 0:
        open_idx = [i for i in range(k) if capacity[i] > 0]
        if not open_idx:
            break
        if leftover < len(open_idx):
            for i in open_idx[:leftover]:
                alloc[i] += 1
                capacity[i] -= 1
            break
        # everyone can take `floor` more; cap at the smallest open capacity
        step = min(leftover // len(open_idx), min(capacity[i] for i in open_idx))
        take = 0
        for i in open_idx:
            amount = min(step, capacity[i])
            alloc[i] += amount
            capacity[i] -= amount
            take += amount
        leftover -= take
    return alloc


def sample_budget(
    corpora: Mapping[str, BitextCorpus], spec: BudgetSpec
) -> BitextCorpus:
    """Sample uniformly without replacement under the fixed total budget.

    Each pair starts from an equal share; shortfalls and the division
    remainder are redistributed round-robin across pairs with data left,
    in spec order.
    """
    spec.validate()
    labels = list(spec.pair_labels) or sorted(corpora)
    if not labels:
        raise DataError("no language pairs to sample")
    missing = [label for label in labels if label not in corpora]
    if missing:
        raise DataError(f"missing corpora for pairs: {missing}")
    sizes = [len(corpora[label]) for label in labels]
    alloc = _allocate(sizes, spec.total_budget)

    rng = np.random.default_rng(spec.seed)
    sampled_pairs: list[BitextPair] = []
    sampled_counts: list[tuple[int, int]] = []
    have_counts = all(corpora[label].token_counts is not None for label in labels)
    for label, take in zip(labels, alloc):
        corpus = corpora[label]
        chosen = np.sort(rng.choice(len(corpus), size=take, replace=False))
        sampled_pairs.extend(corpus.pairs[i] for i in chosen)
        if have_counts:
            sampled_counts.extend(corpus.token_counts[i] for i in chosen)
    return BitextCorpus(sampled_pairs, sampled_counts if have_counts else None)


def filter_min_tokens(
    corpus: BitextCorpus,
    min_tokens: int = DEFAULT_MIN_TOKENS,
    fallback_counter: Callable[[str], int] | None = None,
) -> BitextCorpus:
    """Keep pairs whose sides both have at least ``min_tokens`` tokens.

    Counts come from the producer manifest; the whitespace-style fallback
    exists for synthetic and test corpora only.
    """
    if corpus.token_counts is not None:
        counts = corpus.token_counts
    elif fallback_counter is not None:
        counts = [
            (fallback_counter(p.src_text), fallback_counter(p.tgt_text))
            for p in corpus.pairs
        ]
    else:
        raise DataError("no token counts available and no fallback counter configured")
    kept = [
        i for i, (src_n, tgt_n) in enumerate(counts)
        if src_n >= min_tokens and tgt_n >= min_tokens
    ]
    return BitextCorpus(
        [corpus.pairs[i] for i in kept],
        [counts[i] for i in kept] if corpus.token_counts is not None else None,
    )


def normalize_whitespace(text: str) -> str:
    return _WS_RUN.sub(" ", text.strip())


def decontaminate(
    corpus: BitextCorpus, test_sets: Iterable[Iterable[str]]
) -> tuple[BitextCorpus, int]:
    """Drop pairs whose source or target exactly matches any test sentence
    after whitespace normalization. Returns the surviving corpus and the
    removal count."""
    contaminated: set[str] = set()
    for sentences in test_sets:
        contaminated.update(normalize_whitespace(s) for s in sentences)
    kept = [
        i for i, pair in enumerate(corpus.pairs)
        if normalize_whitespace(pair.src_text) not in contaminated
        and normalize_whitespace(pair.tgt_text) not in contaminated
    ]
    removed = len(corpus) - len(kept)
    return (
        BitextCorpus(
            [corpus.pairs[i] for i in kept],
            [corpus.token_counts[i] for i in kept] if corpus.token_counts else None,
        ),
        removed,
    )


def plan_topk(pair_sizes: Mapping[str, int], k: int, budget: int = DEFAULT_BUDGET) -> BudgetSpec:
    """Budget over the k largest pairs by availability, ties lexicographic."""
    if k <= 0:
        raise DataError("k must be positive")
    if k > len(pair_sizes):
        raise DataError(f"k={k} exceeds the {len(pair_sizes)} known pairs")
    ranked = sorted(pair_sizes.items(), key=lambda item: (-item[1], item[0]))
    return BudgetSpec(total_budget=budget, pair_labels=tuple(label for label, _ in ranked[:k]))


def read_bitext_tsv(path, pair_label: str | None = None) -> BitextCorpus:
    """Read ``id<TAB>src_text<TAB>tgt_text`` lines; the pair label defaults
    to the file stem."""
    path = Path(path)
    label = pair_label or path.stem
    pairs = []
    with path.open("r", encoding="utf-8") as stream:
        for lineno, line in enumerate(stream, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataError(f"{path}:{lineno}: expected id<TAB>src<TAB>tgt")
            pairs.append(BitextPair(fields[0], fields[1], fields[2], label))
    return BitextCorpus(pairs)


def write_bitext_tsv(corpus: BitextCorpus, path) -> None:
    with Path(path).open("w", encoding="utf-8") as sink:
        for pair in corpus.pairs:
            sink.write(f"{pair.id}\t{pair.src_text}\t{pair.tgt_text}\n")


def with_manifest_counts(corpus: BitextCorpus, records: Iterable[dict]) -> BitextCorpus:
    """Attach (src_tokens, tgt_tokens) from manifest records keyed by id."""
    by_id = {r["id"]: (r.get("src_tokens"), r.get("tgt_tokens")) for r in records}
    counts = []
    for pair in corpus.pairs:
        src_n, tgt_n = by_id.get(pair.id, (None, None))
        if src_n is None or tgt_n is None:
            raise DataError(f"pair {pair.id!r}: manifest lacks token counts")
        counts.append((int(src_n), int(tgt_n)))
    return replace_counts(corpus, counts)


def replace_counts(corpus: BitextCorpus, counts: list[tuple[int, int]]) -> BitextCorpus:
    return BitextCorpus(list(corpus.pairs), counts)
