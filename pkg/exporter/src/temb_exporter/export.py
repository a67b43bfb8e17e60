"""Extract token-level hidden states from a pretrained encoder at a chosen
layer and write them as a TEMB container plus manifest.

Layer indexing: 0 is the embedding output, k is the output of transformer
block k. "auto" picks round(2/3 of the block count), the neighborhood that
tends to carry the most transferable token representations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .container import ExportError, manifest_path_for, write_manifest, write_temb

logger = logging.getLogger(__name__)

DEFAULT_MAX_SEQ_LEN = 100


@dataclass
class ExportSpec:
    model_name: str
    input_path: str
    output_path: str
    language: str = "und"
    layer: int | str = "auto"
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN
    batch_size: int = 16
    include_special_tokens: bool = False
    side: str | None = None  # "src" or "tgt" when the input is bitext TSV
    device: str = "cpu"
    extra_sentences: list[tuple[str, str]] = field(default_factory=list)

    def validate(self) -> None:
        if self.max_seq_len < 1 or self.batch_size < 1:
            raise ExportError("max_seq_len and batch_size must be >= 1")
        if self.side not in (None, "src", "tgt"):
            raise ExportError(f"side must be src or tgt, got {self.side!r}")
        if isinstance(self.layer, str) and self.layer != "auto":
            raise ExportError(f"layer must be an integer or 'auto', got {self.layer!r}")


def resolve_layer(total_layers: int, spec: ExportSpec) -> int:
    """Map spec.layer to a hidden-state index, 0..total_layers."""
    if total_layers < 3:
        raise ExportError(f"encoder too shallow ({total_layers} layers)")
    if spec.layer == "auto":
        return round(2 * total_layers / 3)
    layer = int(spec.layer)
    if not 0 <= layer <= total_layers:
        raise ExportError(f"layer {layer} outside [0, {total_layers}]")
    return layer


def read_sentences(spec: ExportSpec) -> list[tuple[str, str]]:
    """(id, text) pairs from one-per-line text or 3-column bitext TSV."""
    path = Path(spec.input_path)
    sentences = []
    with path.open("r", encoding="utf-8") as stream:
        for lineno, line in enumerate(stream):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if spec.side is not None:
                fields = line.split("\t")
                if len(fields) != 3:
                    raise ExportError(f"{path}:{lineno + 1}: expected id<TAB>src<TAB>tgt")
                sid = fields[0]
                text = fields[1] if spec.side == "src" else fields[2]
            else:
                sid, text = f"{path.stem}-{lineno:06d}", line
            if not text.strip():
                raise ExportError(f"{path}:{lineno + 1}: empty {spec.side or 'sentence'}")
            sentences.append((sid, text))
    if not sentences:
        raise ExportError(f"no sentences in {path}")
    return sentences


def load_encoder(model_name: str, device: str = "cpu"):
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_name)
    model = AutoModel.from_pretrained(model_name)
    model.to(device)
    model.eval()
    return tokenizer, model


def hidden_state_count(model) -> int:
    return int(model.config.num_hidden_layers)


@torch.no_grad()
def encode_batch(tokenizer, model, texts, layer, max_seq_len, include_special_tokens, device):
    """Per-sentence (tokens x width) float32 matrices at the given layer."""
    encoded = tokenizer(
        texts,
        return_tensors="pt",
        padding=True,
        truncation=True,
        max_length=max_seq_len + 2,  # leave room for the markers we drop
        return_special_tokens_mask=True,
    )
    special = encoded.pop("special_tokens_mask")
    encoded = {k: v.to(device) for k, v in encoded.items()}
    output = model(**encoded, output_hidden_states=True)
    states = output.hidden_states[layer].cpu()
    attention = encoded["attention_mask"].cpu().bool()
    keep = attention if include_special_tokens else attention & ~special.bool()
    matrices = []
    for row in range(states.shape[0]):
        matrix = states[row][keep[row]][:max_seq_len]
        matrices.append(matrix.to(torch.float32).numpy())
    return matrices


def export(spec: ExportSpec) -> dict:
    """Run the export; returns a summary dict (layer, counts, width)."""
    spec.validate()
    sentences = read_sentences(spec) + list(spec.extra_sentences)
    tokenizer, model = load_encoder(spec.model_name, spec.device)
    layer = resolve_layer(hidden_state_count(model), spec)

    records: list[tuple[str, np.ndarray]] = []
    for start in range(0, len(sentences), spec.batch_size):
        chunk = sentences[start : start + spec.batch_size]
        matrices = encode_batch(
            tokenizer,
            model,
            [text for _, text in chunk],
            layer,
            spec.max_seq_len,
            spec.include_special_tokens,
            spec.device,
        )
        for (sid, text), matrix in zip(chunk, matrices):
            if matrix.shape[0] == 0:
                raise ExportError(f"sentence {sid!r} has no content tokens")
            records.append((sid, matrix))

    width = records[0][1].shape[1]
    write_temb(records, width, spec.output_path)
    write_manifest(
        (
            {
                "id": sid,
                "lang": spec.language,
                "text": text,
                "tokens": int(matrix.shape[0]),
            }
            for (sid, text), (_, matrix) in zip(sentences, records)
        ),
        manifest_path_for(spec.output_path),
    )
    summary = {
        "model": spec.model_name,
        "layer": layer,
        "sentences": len(records),
        "width": width,
        "max_tokens": max(int(m.shape[0]) for _, m in records),
    }
    logger.info("exported %(sentences)d sentences at layer %(layer)d (width %(width)d)", summary)
    return summary
