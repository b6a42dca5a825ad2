"""Byte-level BPE tokenizer training on a forged dataset file."""

from __future__ import annotations

from pathlib import Path

from tokenizers.implementations import ByteLevelBPETokenizer

from .errors import EmptyDataset, VocabOverflow
from .specs import TokenizerSpec


def train_tokenizer(
    dataset_path: Path | str,
    spec: TokenizerSpec = TokenizerSpec(),
) -> tuple[ByteLevelBPETokenizer, dict]:
    """Train a byte-level BPE tokenizer on the dataset text.

    The special tokens land on the reserved low ids 0..4 in spec order. The
    trained vocabulary never exceeds ``spec.vocab_size``; if the byte
    alphabet plus specials alone would overflow a tiny budget, that is
    surfaced as :class:`VocabOverflow` rather than silently exceeded.
    """
    path = Path(dataset_path)
    if not path.is_file() or not path.read_text(encoding="utf-8").strip():
        raise EmptyDataset(path)
    tokenizer = ByteLevelBPETokenizer()
    tokenizer.train(
        [str(path)],
        vocab_size=spec.vocab_size,
        min_frequency=spec.min_frequency,
        special_tokens=list(spec.special_tokens),
    )
    vocab = tokenizer.get_vocab()
    for expected_id, token in enumerate(spec.special_tokens):
        assert vocab.get(token) == expected_id, f"{token} not at reserved id {expected_id}"
    actual = tokenizer.get_vocab_size()
    if actual > spec.vocab_size:
        raise VocabOverflow(actual, spec.vocab_size)
    stats = {
        "vocab_size": actual,
        "requested_vocab_size": spec.vocab_size,
        "min_frequency": spec.min_frequency,
        "special_tokens": list(spec.special_tokens),
    }
    return tokenizer, stats


def save_tokenizer(tokenizer: ByteLevelBPETokenizer, out_dir: Path | str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tokenizer.save_model(str(out))


def load_tokenizer(artifact_dir: Path | str) -> ByteLevelBPETokenizer:
    root = Path(artifact_dir)
    return ByteLevelBPETokenizer(
        str(root / "vocab.json"), str(root / "merges.txt")
    )
