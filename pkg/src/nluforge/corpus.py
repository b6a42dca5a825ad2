"""Raw corpus ingestion: line-oriented text files to an indexed sentence store."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EncodingError, FileUnreadable

_WS_RUN = re.compile(r"\s+")


def normalize_line(raw: str) -> str:
    """Trim and collapse internal whitespace runs to single spaces."""
    return _WS_RUN.sub(" ", raw.strip())


@dataclass(frozen=True)
class Sentence:
    """One normalized corpus sentence."""

    id: int
    text: str
    source: str


@dataclass(frozen=True)
class ManifestEntry:
    """Per-file ingestion tally: lines kept and lines dropped as blank."""

    tag: str
    ingested: int
    dropped: int


@dataclass
class SentenceStore:
    """Ordered, densely indexed collection of sentences.

    A completed store is treated as immutable; ids always form the range
    0..n-1 in sequence order.
    """

    sentences: list[Sentence] = field(default_factory=list)
    source_manifest: list[ManifestEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def get(self, sentence_id: int) -> Sentence:
        if 0 <= sentence_id < len(self.sentences):
            return self.sentences[sentence_id]
        raise KeyError(sentence_id)

    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]

    def to_jsonl(self) -> str:
        """Canonical serialization: one compact JSON record per sentence."""
        lines = [
            json.dumps(
                {"id": s.id, "source": s.source, "text": s.text},
                ensure_ascii=False,
                sort_keys=True,
                separators=(",", ":"),
            )
            for s in self.sentences
        ]
        return "".join(line + "\n" for line in lines)

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "SentenceStore":
        store = cls()
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                store.sentences.append(
                    Sentence(id=rec["id"], text=rec["text"], source=rec["source"])
                )
        return store


def _decode_utf8(path: Path) -> str:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FileUnreadable(str(path), str(exc)) from exc
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = data[: exc.start].count(b"\n") + 1
        raise EncodingError(str(path), line) from exc


def ingest(paths: Sequence[Path | str]) -> SentenceStore:
    """Read files in order into a store, one sentence per non-empty line.

    Lines are normalized; whitespace-only lines are dropped and counted in
    the manifest. Duplicates are kept (see :func:`deduplicate`).
    """
    store = SentenceStore()
    next_id = 0
    for p in paths:
        path = Path(p)
        text = _decode_utf8(path)
        tag = path.stem
        kept = 0
        dropped = 0
        for raw in text.splitlines():
            norm = normalize_line(raw)
            if not norm:
                dropped += 1
                continue
            store.sentences.append(Sentence(id=next_id, text=norm, source=tag))
            next_id += 1
            kept += 1
        store.source_manifest.append(ManifestEntry(tag=tag, ingested=kept, dropped=dropped))
    return store


def deduplicate(store: SentenceStore) -> SentenceStore:
    """Drop later exact-text duplicates, keeping first occurrences in order.

    Ids are reassigned densely so the result again satisfies the 0..n-1
    invariant. Idempotent.
    """
    seen: set[str] = set()
    survivors: list[Sentence] = []
    for s in store.sentences:
        if s.text in seen:
            continue
        seen.add(s.text)
        survivors.append(Sentence(id=len(survivors), text=s.text, source=s.source))
    return SentenceStore(sentences=survivors, source_manifest=list(store.source_manifest))
