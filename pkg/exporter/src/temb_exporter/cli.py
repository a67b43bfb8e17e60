"""Command-line entry point: one encoder pass, one TEMB file."""

from __future__ import annotations

import argparse
import sys

from .container import ExportError
from .export import ExportSpec, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temb-export",
        description="Export token-level hidden states to a TEMB container",
    )
    parser.add_argument("--model", required=True, help="model name or local path")
    parser.add_argument("--layer", default="auto", help="'auto' or a hidden-state index")
    parser.add_argument("--in", dest="input_path", required=True, help="text or bitext TSV")
    parser.add_argument("--lang", default="und")
    parser.add_argument("--out", required=True, help="output .temb path")
    parser.add_argument("--side", choices=["src", "tgt"], help="which TSV side to export")
    parser.add_argument("--max-seq-len", type=int, default=100, dest="max_seq_len")
    parser.add_argument("--batch-size", type=int, default=16, dest="batch_size")
    parser.add_argument(
        "--include-special-tokens", action="store_true", dest="include_special_tokens"
    )
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    layer = args.layer if args.layer == "auto" else int(args.layer)
    spec = ExportSpec(
        model_name=args.model,
        input_path=args.input_path,
        output_path=args.out,
        language=args.lang,
        layer=layer,
        max_seq_len=args.max_seq_len,
        batch_size=args.batch_size,
        include_special_tokens=args.include_special_tokens,
        side=args.side,
        device=args.device,
    )
    try:
        summary = export(spec)
    except ExportError as exc:
        print(f"temb-export: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"temb-export: {exc}", file=sys.stderr)
        return 2
    print(
        f"wrote {summary['sentences']} sentences (layer {summary['layer']}, "
        f"width {summary['width']}) to {args.out}",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
