from __future__ import annotations

import random
from pathlib import Path

import pytest

from nluforge.corpus import SentenceStore, deduplicate, ingest

FIXTURES = Path(__file__).parent / "fixtures"

GOLDEN_CORPUS = FIXTURES / "golden_corpus.txt"

_SUBJECTS = (
    "The cat", "A neighbor", "My teacher", "The old clock", "That little boat",
    "Her brother", "The gardener", "A gray pigeon", "The baker", "Our dog",
)
_VERBS = (
    "watches", "remembers", "paints", "follows", "fixes",
    "carries", "hides", "borrows", "mends", "counts",
)
_OBJECTS = (
    "the garden", "a quiet song", "the morning light", "an open door",
    "the long road", "a paper kite", "the empty shelf", "a wooden spoon",
    "the last apple", "a folded map",
)


def synthetic_sentences(n: int, seed: int = 20240) -> list[str]:
    """Deterministic synthetic corpus lines, all distinct."""
    rng = random.Random(seed)
    return [
        f"{rng.choice(_SUBJECTS)} {rng.choice(_VERBS)} {rng.choice(_OBJECTS)} number {i}."
        for i in range(n)
    ]


def write_corpus(path: Path, lines: list[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def corpus_file(tmp_path):
    def make(lines: list[str], name: str = "corpus.txt") -> Path:
        return write_corpus(tmp_path / name, lines)

    return make


@pytest.fixture
def small_store(corpus_file) -> SentenceStore:
    return deduplicate(ingest([corpus_file(synthetic_sentences(30))]))
