import numpy as np
import pytest

from xlalign.corpus import (
    BitextCorpus,
    BitextPair,
    BudgetSpec,
    decontaminate,
    filter_min_tokens,
    normalize_whitespace,
    plan_topk,
    read_bitext_tsv,
    sample_budget,
    with_manifest_counts,
    write_bitext_tsv,
)
from xlalign.errors import DataError


def corpus_of(n, label="aa-bb", start=0, counts=None):
    pairs = [
        BitextPair(f"{label}:{start + i}", f"src sentence {start + i}", f"tgt sentence {start + i}", label)
        for i in range(n)
    ]
    return BitextCorpus(pairs, counts)


def roundrobin_reference(sizes, budget):
    """One-at-a-time reference allocator, independent of the library's
    chunked implementation."""
    k = len(sizes)
    alloc = [min(s, budget // k) for s in sizes]
    leftover = budget - sum(alloc)
    cursor = 0
    while leftover > 0 and any(alloc[i] < sizes[i] for i in range(k)):
        i = cursor % k
        cursor += 1
        if alloc[i] < sizes[i]:
            alloc[i] += 1
            leftover -= 1
    return alloc


class TestSampleBudget:
    def test_even_split(self):
        corpora = {f"p{i}-xx": corpus_of(5, f"p{i}-xx") for i in range(4)}
        spec = BudgetSpec(total_budget=8, pair_labels=tuple(sorted(corpora)))
        sampled = sample_budget(corpora, spec)
        assert len(sampled) == 8
        by_label = {}
        for pair in sampled.pairs:
            by_label[pair.pair_label] = by_label.get(pair.pair_label, 0) + 1
        assert set(by_label.values()) == {2}

    def test_shortfall_redistribution(self):
        corpora = {
            "aa-bb": corpus_of(1, "aa-bb"),
            "cc-dd": corpus_of(100, "cc-dd"),
            "ee-ff": corpus_of(100, "ee-ff"),
        }
        spec = BudgetSpec(total_budget=9, pair_labels=("aa-bb", "cc-dd", "ee-ff"))
        sampled = sample_budget(corpora, spec)
        by_label = {}
        for pair in sampled.pairs:
            by_label[pair.pair_label] = by_label.get(pair.pair_label, 0) + 1
        assert by_label == {"aa-bb": 1, "cc-dd": 4, "ee-ff": 4}

    def test_budget_larger_than_corpus(self):
        corpora = {"aa-bb": corpus_of(7, "aa-bb")}
        sampled = sample_budget(corpora, BudgetSpec(total_budget=100, pair_labels=("aa-bb",)))
        assert len(sampled) == 7

    @pytest.mark.parametrize("seed", range(20))
    def test_allocation_matches_roundrobin_reference(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 5))
        sizes = [int(rng.integers(0, 12)) for _ in range(k)]
        budget = int(rng.integers(1, 25))
        labels = [f"l{i}-m{i}" for i in range(k)]
        corpora = {
            label: corpus_of(size, label) for label, size in zip(labels, sizes)
        }
        sampled = sample_budget(corpora, BudgetSpec(total_budget=budget, pair_labels=tuple(labels)))
        by_label = {label: 0 for label in labels}
        for pair in sampled.pairs:
            by_label[pair.pair_label] += 1
        assert [by_label[label] for label in labels] == roundrobin_reference(sizes, budget)
        assert len(sampled) == min(budget, sum(sizes))

    def test_deterministic_given_seed(self):
        corpora = {"aa-bb": corpus_of(50, "aa-bb")}
        spec = BudgetSpec(total_budget=10, pair_labels=("aa-bb",), seed=4)
        first = sample_budget(corpora, spec)
        second = sample_budget(corpora, spec)
        assert [p.id for p in first.pairs] == [p.id for p in second.pairs]

    def test_sampling_without_replacement(self):
        corpora = {"aa-bb": corpus_of(30, "aa-bb")}
        sampled = sample_budget(corpora, BudgetSpec(total_budget=30, pair_labels=("aa-bb",)))
        assert len({p.id for p in sampled.pairs}) == 30

    def test_no_pairs_rejected(self):
        with pytest.raises(DataError):
            sample_budget({}, BudgetSpec(total_budget=5))


class TestFilterMinTokens:
    def test_boundary_behavior(self):
        corpus = corpus_of(2, counts=[(4, 12), (5, 5)])
        kept = filter_min_tokens(corpus, 5)
        assert len(kept) == 1
        assert kept.token_counts == [(5, 5)]

    def test_fallback_counter(self):
        pairs = [BitextPair("x", "one two three four five", "uno dos tres cuatro cinco", "aa-bb"),
                 BitextPair("y", "too short", "also short", "aa-bb")]
        corpus = BitextCorpus(pairs)
        kept = filter_min_tokens(corpus, 5, fallback_counter=lambda s: len(s.split()))
        assert [p.id for p in kept.pairs] == ["x"]

    def test_no_counts_no_fallback_rejected(self):
        with pytest.raises(DataError, match="fallback"):
            filter_min_tokens(corpus_of(1), 5)

    def test_large_random_corpus_matches_oracle_refilter(self):
        rng = np.random.default_rng(3)
        counts = [(int(rng.integers(0, 12)), int(rng.integers(0, 12))) for _ in range(1000)]
        corpus = corpus_of(1000, counts=counts)
        kept = filter_min_tokens(corpus, 5)
        survivors = {p.id for p in kept.pairs}
        oracle = {
            pair.id
            for pair, (a, b) in zip(corpus.pairs, counts)
            if a >= 5 and b >= 5
        }
        assert survivors == oracle


class TestDecontaminate:
    def test_whitespace_normalized_match_removed(self):
        corpus = BitextCorpus(
            [BitextPair("x", "Hello   world", "Bonjour monde", "en-fr")]
        )
        cleaned, removed = decontaminate(corpus, [["  Hello world \n"]])
        assert removed == 1 and len(cleaned) == 0

    def test_disjoint_sets_untouched(self):
        corpus = corpus_of(5)
        cleaned, removed = decontaminate(corpus, [["something else entirely"]])
        assert removed == 0
        assert [p.id for p in cleaned.pairs] == [p.id for p in corpus.pairs]

    def test_planted_overlap_matches_bruteforce_oracle(self):
        n = 10_000
        corpus = corpus_of(n)
        planted = [13, 405, 1999, 3777, 5200, 8013, 9998]
        test_side = ["src sentence %d" % i for i in planted[:4]]
        test_side += ["tgt sentence %d" % i for i in planted[4:]]
        cleaned, removed = decontaminate(corpus, [test_side])
        contaminated = {normalize_whitespace(s) for s in test_side}
        oracle = sum(
            1
            for p in corpus.pairs
            if normalize_whitespace(p.src_text) in contaminated
            or normalize_whitespace(p.tgt_text) in contaminated
        )
        assert removed == oracle == len(planted)
        assert len(cleaned) == n - removed

    def test_idempotent(self):
        corpus = corpus_of(100)
        test_sets = [["src sentence 3", "tgt sentence 44"]]
        once, removed_once = decontaminate(corpus, test_sets)
        twice, removed_twice = decontaminate(once, test_sets)
        assert removed_twice == 0
        assert [p.id for p in twice.pairs] == [p.id for p in once.pairs]


class TestPlanTopk:
    def test_largest_two(self):
        spec = plan_topk({"aa-xx": 10, "bb-xx": 20, "cc-xx": 30}, k=2, budget=100)
        assert spec.pair_labels == ("cc-xx", "bb-xx")
        assert spec.total_budget == 100

    def test_all_pairs_ordered_by_size(self):
        spec = plan_topk({"aa-xx": 10, "bb-xx": 20, "cc-xx": 30}, k=3)
        assert spec.pair_labels == ("cc-xx", "bb-xx", "aa-xx")

    def test_ties_break_lexicographically(self):
        spec = plan_topk({"bb-xx": 10, "aa-xx": 10, "cc-xx": 5}, k=2)
        assert spec.pair_labels == ("aa-xx", "bb-xx")

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(8)
        sizes = {f"p{i:03d}-xx": int(rng.integers(0, 10_000)) for i in range(100)}
        spec = plan_topk(sizes, k=32)
        oracle = sorted(sizes, key=lambda label: (-sizes[label], label))[:32]
        assert list(spec.pair_labels) == oracle

    def test_bad_k_rejected(self):
        with pytest.raises(DataError):
            plan_topk({"aa-bb": 1}, k=0)
        with pytest.raises(DataError):
            plan_topk({"aa-bb": 1}, k=2)


class TestIo:
    def test_tsv_roundtrip(self, tmp_path):
        corpus = corpus_of(4, label="de-en")
        path = tmp_path / "de-en.tsv"
        write_bitext_tsv(corpus, path)
        restored = read_bitext_tsv(path)
        assert [p.id for p in restored.pairs] == [p.id for p in corpus.pairs]
        assert restored.pairs[0].pair_label == "de-en"

    def test_manifest_counts_attached(self):
        corpus = corpus_of(2)
        records = [
            {"id": corpus.pairs[0].id, "src_tokens": 6, "tgt_tokens": 7},
            {"id": corpus.pairs[1].id, "src_tokens": 3, "tgt_tokens": 9},
        ]
        with_counts = with_manifest_counts(corpus, records)
        assert with_counts.token_counts == [(6, 7), (3, 9)]

    def test_missing_manifest_counts_rejected(self):
        corpus = corpus_of(1)
        with pytest.raises(DataError, match="token counts"):
            with_manifest_counts(corpus, [])

    def test_malformed_label_rejected(self):
        with pytest.raises(DataError, match="label"):
            BitextCorpus([BitextPair("x", "a text", "b text", "notalabel")])
