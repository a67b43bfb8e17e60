"""Command-line entry point: score, retrieve, mine, train, prepare-data,
ablate. Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go
to stderr; data goes to files or stdout. Every run with file outputs also
writes a manifest (resolved config + input digests) next to them."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import AblationGrid, PoolingMethod, render_grid, rows_to_jsonl, run_grid
from .corpus import (
    BudgetSpec,
    decontaminate,
    filter_min_tokens,
    plan_topk,
    read_bitext_tsv,
    sample_budget,
    with_manifest_counts,
    write_bitext_tsv,
)
from .errors import AlignerError, DataError
from .mining import (
    CandidateRule,
    MiningConfig,
    mine,
    read_pairs_tsv,
    write_pairs_tsv,
)
from .normalize import NormalizationConfig, NormScope
from .retrieval import RetrievalTask, aggregate, evaluate_retrieval
from .scoring import ScoreMode, load_params
from .store import load_set, read_manifest, save_set
from .synthetic import SyntheticCorpusSpec, generate_synthetic_pair
from .training import TrainerConfig, save_params, train

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _default_jobs() -> int:
    env = os.environ.get("ALIGNER_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _norm_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, default=0.75, help="normalization strength")
    parser.add_argument(
        "--norm-scope", choices=["pool", "tile"], default="pool", dest="norm_scope"
    )
    parser.add_argument("--tile-size", type=int, default=256, dest="tile_size")
    parser.add_argument(
        "--no-norm", action="store_true", dest="no_norm", help="bypass normalization"
    )


def _norm_from(args) -> NormalizationConfig | None:
    if args.no_norm:
        return None
    return NormalizationConfig(
        alpha=args.alpha, scope=NormScope(args.norm_scope), tile_size=args.tile_size
    )


def _mode_from(args) -> ScoreMode:
    return ScoreMode(args.mode)


def _params_from(args):
    return load_params(args.params) if getattr(args, "params", None) else None


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as stream:
        for chunk in iter(lambda: stream.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(anchor: Path, command: str, config: dict, inputs: list) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {
            str(p): _sha256(p) for p in sorted(set(map(str, inputs))) if Path(p).is_file()
        },
        "tool_version": __version__,
    }
    path = anchor / "manifest.json" if anchor.is_dir() else anchor.with_name(anchor.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _config_dict(args, keys) -> dict:
    return {key: getattr(args, key) for key in keys}


def build_parser() -> _Parser:
    parser = _Parser(prog="xlalign", description=__doc__)
    parser.add_argument("--version", action="version", version=f"xlalign {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand")

    score = sub.add_parser("score", parents=[], help="print the normalized score matrix")
    score.add_argument("--src", required=True)
    score.add_argument("--tgt", required=True)
    score.add_argument("--mode", choices=[m.value for m in ScoreMode], default="eval-cosine")
    score.add_argument("--params")
    score.add_argument("--out", help="write the matrix to a file instead of stdout")
    _norm_flags(score)

    retrieve = sub.add_parser("retrieve", help="argmax retrieval accuracy over a pool")
    retrieve.add_argument("--src", required=True)
    retrieve.add_argument("--tgt", required=True)
    retrieve.add_argument("--gold", required=True)
    retrieve.add_argument("--params")
    retrieve.add_argument("--mode", choices=[m.value for m in ScoreMode], default="eval-cosine")
    retrieve.add_argument("--pair-label", default=None, dest="pair_label")
    retrieve.add_argument("--bidirectional", action="store_true")
    retrieve.add_argument("--out", help="write the JSONL report here")
    _norm_flags(retrieve)

    mine_cmd = sub.add_parser("mine", help="threshold mining over two pools")
    mine_cmd.add_argument("--src", required=True)
    mine_cmd.add_argument("--tgt", required=True)
    mine_cmd.add_argument("--gold")
    group = mine_cmd.add_mutually_exclusive_group(required=True)
    group.add_argument("--threshold", type=float)
    group.add_argument("--sweep", action="store_true")
    mine_cmd.add_argument(
        "--rule", choices=[r.value for r in CandidateRule], default="best"
    )
    mine_cmd.add_argument("--params")
    mine_cmd.add_argument("--out", help="write predictions TSV here")
    _norm_flags(mine_cmd)
    mine_cmd.set_defaults(norm_scope="tile")

    train_cmd = sub.add_parser("train", help="train the projection scorer")
    train_cmd.add_argument("--src", required=True)
    train_cmd.add_argument("--tgt", required=True)
    train_cmd.add_argument("--gold", required=True)
    train_cmd.add_argument("--config", help="JSON file with trainer settings")
    train_cmd.add_argument("--out", required=True, help="checkpoint path")
    train_cmd.add_argument("--epochs", type=int)
    train_cmd.add_argument("--batch-size", type=int, dest="batch_size")
    train_cmd.add_argument("--temperature", type=float)
    train_cmd.add_argument("--learning-rate", type=float, dest="learning_rate")
    train_cmd.add_argument("--seed", type=int)
    train_cmd.add_argument("--alpha", type=float)

    prepare = sub.add_parser("prepare-data", help="synthesize embeddings or sample a corpus")
    prepare.add_argument("--synthetic", help="JSON spec for a synthetic pair")
    prepare.add_argument("--pairs", help="directory of <label>.tsv bitext files")
    prepare.add_argument("--budget", type=int, default=1_000_000)
    prepare.add_argument("--min-tokens", type=int, default=5, dest="min_tokens")
    prepare.add_argument("--decontaminate", help="directory of test-set .txt files")
    prepare.add_argument("--top-k", type=int, default=None, dest="top_k")
    prepare.add_argument("--seed", type=int, default=0)
    prepare.add_argument("--out", required=True, help="output directory")

    ablate = sub.add_parser("ablate", help="run the pooling x normalization grid")
    ablate.add_argument("--grid", required=True, help="JSON grid description")
    ablate.add_argument("--out", required=True, help="JSONL output path")
    ablate.add_argument("--jobs", type=int, default=_default_jobs())

    return parser


def _format_matrix(matrix: np.ndarray) -> str:
    return "\n".join(" ".join(f"{v:.6f}" for v in row) for row in matrix) + "\n"


def _cmd_score(args) -> int:
    from .normalize import normalize_matrix
    from .scoring import score_tile

    src = load_set(args.src)
    tgt = load_set(args.tgt)
    raw = score_tile(src.entries, tgt.entries, _mode_from(args), _params_from(args))
    text = _format_matrix(normalize_matrix(raw, _norm_from(args)))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        _write_manifest(
            Path(args.out),
            "score",
            _config_dict(args, ["mode", "alpha", "norm_scope", "tile_size", "no_norm"]),
            [args.src, args.tgt] + ([args.params] if args.params else []),
        )
    else:
        sys.stdout.write(text)
    return 0


def _load_task(args) -> RetrievalTask:
    src = load_set(args.src)
    tgt = load_set(args.tgt)
    gold = dict(read_pairs_tsv(args.gold))
    label = args.pair_label or f"{src.language}-{tgt.language}"
    return RetrievalTask(src, tgt, gold, label)


def _cmd_retrieve(args) -> int:
    task = _load_task(args)
    accuracy = evaluate_retrieval(
        task,
        mode=_mode_from(args),
        norm=_norm_from(args),
        params=_params_from(args),
        bidirectional=args.bidirectional,
    )
    settings = {
        "mode": args.mode,
        "norm": None if args.no_norm else {
            "alpha": args.alpha, "scope": args.norm_scope, "tile_size": args.tile_size,
        },
        "params": args.params or "identity",
        "direction": "bidirectional" if args.bidirectional else "forward",
    }
    report = aggregate({task.pair_label: accuracy}, settings)
    print(report.render())
    if args.out:
        Path(args.out).write_text(report.to_jsonl(), encoding="utf-8")
        _write_manifest(
            Path(args.out),
            "retrieve",
            settings,
            [args.src, args.tgt, args.gold] + ([args.params] if args.params else []),
        )
    return 0


def _cmd_mine(args) -> int:
    src = load_set(args.src)
    tgt = load_set(args.tgt)
    gold = set(read_pairs_tsv(args.gold)) if args.gold else None
    if args.sweep and gold is None:
        raise DataError("--sweep requires --gold")
    config = MiningConfig(
        threshold="sweep" if args.sweep else args.threshold,
        candidate_rule=CandidateRule(args.rule),
        norm=_norm_from(args),
        mode=ScoreMode.EVAL_COSINE,
    )
    report = mine(src, tgt, config, _params_from(args), gold)
    print(
        f"predicted={len(report.predicted)} threshold={report.chosen_threshold:.6f} "
        f"precision={report.precision:.4f} recall={report.recall:.4f} f1={report.f1:.4f}",
        file=sys.stderr,
    )
    pairs = [(p.src_id, p.tgt_id) for p in report.predicted]
    if args.out:
        write_pairs_tsv(pairs, args.out)
        _write_manifest(
            Path(args.out),
            "mine",
            {
                "threshold": report.chosen_threshold,
                "rule": args.rule,
                "alpha": args.alpha,
                "norm_scope": args.norm_scope,
                "tile_size": args.tile_size,
                "no_norm": args.no_norm,
            },
            [args.src, args.tgt] + ([args.gold] if args.gold else []),
        )
    else:
        for src_id, tgt_id in pairs:
            print(f"{src_id}\t{tgt_id}")
    return 0


def _cmd_train(args) -> int:
    file_config = {}
    if args.config:
        file_config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    defaults = TrainerConfig()
    merged = {
        "epochs": defaults.epochs,
        "batch_size": defaults.batch_size,
        "temperature": defaults.temperature,
        "learning_rate": defaults.learning_rate,
        "seed": defaults.seed,
        "alpha": defaults.norm.alpha,
    }
    merged.update({k: v for k, v in file_config.items() if k in merged})
    for key in merged:  # flags win over the config file
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    config = TrainerConfig(
        epochs=merged["epochs"],
        batch_size=merged["batch_size"],
        temperature=merged["temperature"],
        learning_rate=merged["learning_rate"],
        seed=merged["seed"],
        norm=NormalizationConfig(alpha=merged["alpha"], scope=NormScope.TILE),
    )
    src = load_set(args.src)
    tgt = load_set(args.tgt)
    gold = dict(read_pairs_tsv(args.gold))
    params, trace = train(src, tgt, config, gold)
    save_params(params, args.out)
    for epoch, loss in enumerate(trace):
        print(f"epoch {epoch}: loss {loss:.6f}", file=sys.stderr)
    _write_manifest(
        Path(args.out),
        "train",
        merged,
        [args.src, args.tgt, args.gold] + ([args.config] if args.config else []),
    )
    return 0


def _cmd_prepare_data(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if bool(args.synthetic) == bool(args.pairs):
        raise DataError("exactly one of --synthetic or --pairs is required")
    if args.synthetic:
        raw = json.loads(Path(args.synthetic).read_text(encoding="utf-8"))
        raw["tokens_per_sentence"] = tuple(raw.get("tokens_per_sentence", (4, 12)))
        spec = SyntheticCorpusSpec(**raw)
        src_set, tgt_set, gold = generate_synthetic_pair(spec)
        save_set(src_set, out_dir / "src.temb")
        save_set(tgt_set, out_dir / "tgt.temb")
        write_pairs_tsv(sorted(gold.items()), out_dir / "gold.tsv")
        _write_manifest(out_dir, "prepare-data", raw, [args.synthetic])
        return 0

    pairs_dir = Path(args.pairs)
    corpora = {}
    for tsv in sorted(pairs_dir.glob("*.tsv")):
        corpus = read_bitext_tsv(tsv)
        sidecar = tsv.with_suffix(".manifest.jsonl")
        if sidecar.exists():
            corpus = with_manifest_counts(corpus, read_manifest(sidecar))
        corpora[tsv.stem] = corpus
    if not corpora:
        raise DataError(f"no .tsv corpora found in {pairs_dir}")
    sizes = {label: len(c) for label, c in corpora.items()}
    if args.top_k is not None:
        spec = plan_topk(sizes, args.top_k, args.budget)
        spec = dataclasses.replace(spec, min_tokens=args.min_tokens, seed=args.seed)
    else:
        ordered = tuple(sorted(sizes, key=lambda l: (-sizes[l], l)))
        spec = BudgetSpec(args.budget, ordered, args.min_tokens, args.seed)
    sampled = sample_budget(corpora, spec)
    filtered = filter_min_tokens(sampled, spec.min_tokens, fallback_counter=lambda s: len(s.split()))
    removed = 0
    inputs = [str(p) for p in sorted(pairs_dir.glob("*.tsv"))]
    if args.decontaminate:
        test_sets = []
        for txt in sorted(Path(args.decontaminate).glob("*.txt")):
            test_sets.append(txt.read_text(encoding="utf-8").splitlines())
            inputs.append(str(txt))
        filtered, removed = decontaminate(filtered, test_sets)
    write_bitext_tsv(filtered, out_dir / "corpus.tsv")
    stats = {
        "pairs": {label: int(n) for label, n in sizes.items()},
        "selected_pairs": list(spec.pair_labels),
        "sampled": len(sampled),
        "after_min_tokens": None,
        "decontaminated_removed": removed,
        "final": len(filtered),
    }
    stats["after_min_tokens"] = len(filtered) + removed
    (out_dir / "stats.json").write_text(
        json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_manifest(
        out_dir,
        "prepare-data",
        {
            "budget": args.budget,
            "min_tokens": args.min_tokens,
            "top_k": args.top_k,
            "seed": args.seed,
        },
        inputs,
    )
    return 0


def _cmd_ablate(args) -> int:
    raw = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    tasks = []
    if "synthetic" in raw:
        spec_dict = dict(raw["synthetic"])
        spec_dict["tokens_per_sentence"] = tuple(spec_dict.get("tokens_per_sentence", (4, 12)))
        spec_dict.setdefault("rotation_seed", 0)
        tasks.append(("synthetic", SyntheticCorpusSpec(**spec_dict)))
    for entry in raw.get("tasks", []):
        src = load_set(entry["src"])
        tgt = load_set(entry["tgt"])
        gold = dict(read_pairs_tsv(entry["gold"]))
        label = entry.get("label", f"{src.language}-{tgt.language}")
        tasks.append((label, RetrievalTask(src, tgt, gold, label)))
    grid = AblationGrid(
        pooling=[PoolingMethod(p) for p in raw.get("pooling", ["bert-score", "avg-pool"])],
        normalization=[bool(x) for x in raw.get("normalization", [True, False])],
        alphas=[float(a) for a in raw.get("alphas", [0.75])],
        seeds=[int(s) for s in raw.get("seeds", [0])],
        tasks=tasks,
    )
    rows = run_grid(grid, jobs=args.jobs)
    Path(args.out).write_text(rows_to_jsonl(rows), encoding="utf-8")
    print(render_grid(rows))
    _write_manifest(Path(args.out), "ablate", {"jobs": args.jobs, "grid": raw}, [args.grid])
    return 0


_COMMANDS = {
    "score": _cmd_score,
    "retrieve": _cmd_retrieve,
    "mine": _cmd_mine,
    "train": _cmd_train,
    "prepare-data": _cmd_prepare_data,
    "ablate": _cmd_ablate,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.subcommand:
        parser.print_usage(sys.stderr)
        return USAGE_EXIT
    try:
        return _COMMANDS[args.subcommand](args)
    except AlignerError as exc:
        print(f"xlalign {args.subcommand}: {exc}", file=sys.stderr)
        return DATA_EXIT
    except OSError as exc:
        print(f"xlalign {args.subcommand}: {exc}", file=sys.stderr)
        return DATA_EXIT


def main(argv: list[str] | None = None) -> int:
    try:
        return dispatch(argv)
    except SystemExit as exc:  # argparse --version / usage errors
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
