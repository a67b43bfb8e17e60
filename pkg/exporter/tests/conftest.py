"""Fixtures: a tiny locally-constructed encoder (no downloads) and a small
template-based parallel corpus in four languages."""

import itertools

import pytest
import torch


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """Random-weight 3-layer BERT with a handwritten vocab, saved locally."""
    from transformers import BertConfig, BertModel, BertTokenizerFast

    root = tmp_path_factory.mktemp("tinybert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + [
        "the", "a", "i", "we", "see", "like", "cat", "cats", "dog", "dogs",
        "house", "houses", "tree", "trees", "bird", "birds", "two", "three",
        "four", "five", "red", "blue", "small", "big", "today", "der", "die",
        "das", "ich", "sehe", "hund", "hunde", "katze", "katzen", "##s",
        "##e", "##n", "veo", "dos", "tres", "perros", "gatos",
    ]
    (root / "vocab.txt").write_text("\n".join(vocab), encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(root / "vocab.txt"), do_lower_case=True)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=3,
        num_attention_heads=2,
        intermediate_size=37,
        max_position_embeddings=256,
    )
    torch.manual_seed(0)
    model = BertModel(config)
    model.save_pretrained(root)
    tokenizer.save_pretrained(root)
    return str(root)


@pytest.fixture
def sentences_file(tmp_path):
    path = tmp_path / "sentences.txt"
    path.write_text(
        "the cat sees two dogs\n"
        "\n"
        "i like three birds\n"
        "we see the big house\n",
        encoding="utf-8",
    )
    return path


NOUNS = {
    "en": ["dogs", "cats", "houses", "cars", "books", "trees", "birds", "flowers", "children", "stars"],
    "es": ["perros", "gatos", "casas", "coches", "libros", "árboles", "pájaros", "flores", "niños", "estrellas"],
    "de": ["Hunde", "Katzen", "Häuser", "Autos", "Bücher", "Bäume", "Vögel", "Blumen", "Kinder", "Sterne"],
    "fr": ["chiens", "chats", "maisons", "voitures", "livres", "arbres", "oiseaux", "fleurs", "enfants", "étoiles"],
}

NUMBERS = {
    "en": ["two", "three", "four", "five", "six", "seven", "eight", "nine"],
    "es": ["dos", "tres", "cuatro", "cinco", "seis", "siete", "ocho", "nueve"],
    "de": ["zwei", "drei", "vier", "fünf", "sechs", "sieben", "acht", "neun"],
    "fr": ["deux", "trois", "quatre", "cinq", "six", "sept", "huit", "neuf"],
}

TEMPLATES = {
    "en": ["i see {n} {w}", "i like {n} {w}", "we see {n} {w}", "today i see {n} {w}"],
    "es": ["veo {n} {w}", "me gustan {n} {w}", "vemos {n} {w}", "hoy veo {n} {w}"],
    "de": ["ich sehe {n} {w}", "ich mag {n} {w}", "wir sehen {n} {w}", "heute sehe ich {n} {w}"],
    "fr": ["je vois {n} {w}", "j'aime {n} {w}", "nous voyons {n} {w}", "aujourd'hui je vois {n} {w}"],
}


def parallel_sentences(lang, count=200):
    """Deterministic aligned sentences; index i means the same thing in
    every language."""
    combos = list(
        itertools.product(range(len(TEMPLATES[lang])), range(8), range(10))
    )
    out = []
    for template_idx, number_idx, noun_idx in combos[:count]:
        out.append(
            TEMPLATES[lang][template_idx].format(
                n=NUMBERS[lang][number_idx], w=NOUNS[lang][noun_idx]
            )
        )
    return out
