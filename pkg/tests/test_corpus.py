from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nluforge.corpus import SentenceStore, deduplicate, ingest, normalize_line
from nluforge.errors import EncodingError, FileUnreadable


def test_ingest_drops_blank_lines_and_normalizes(corpus_file):
    path = corpus_file(["This is Big Bird.", "", "  Enough with that.  "])
    store = ingest([path])
    assert [s.text for s in store] == ["This is Big Bird.", "Enough with that."]
    assert [s.id for s in store] == [0, 1]
    assert store.source_manifest[0].ingested == 2
    assert store.source_manifest[0].dropped == 1


def test_ingest_empty_file(corpus_file):
    store = ingest([corpus_file([])])
    assert len(store) == 0


def test_ingest_collapses_internal_whitespace(corpus_file):
    store = ingest([corpus_file(["a\t\t b   c"])])
    assert store.get(0).text == "a b c"


def test_ingest_order_follows_input_order(corpus_file):
    a = corpus_file(["alpha"], "a.txt")
    b = corpus_file(["beta"], "b.txt")
    ab = ingest([a, b])
    ba = ingest([b, a])
    assert ab.texts() == ["alpha", "beta"]
    assert ba.texts() == ["beta", "alpha"]
    assert set(ab.texts()) == set(ba.texts())


def test_ingest_records_source_tag(corpus_file):
    store = ingest([corpus_file(["hello"], "stories.txt")])
    assert store.get(0).source == "stories"


def test_ingest_missing_file(tmp_path):
    with pytest.raises(FileUnreadable):
        ingest([tmp_path / "nope.txt"])


def test_ingest_invalid_utf8_reports_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_bytes(b"fine line\nalso fine\nbroken \xff here\n")
    with pytest.raises(EncodingError) as excinfo:
        ingest([path])
    assert excinfo.value.line == 3


def test_deduplicate_keeps_first_occurrence(corpus_file):
    store = ingest([corpus_file(["a", "a", "b"])])
    deduped = deduplicate(store)
    assert deduped.texts() == ["a", "b"]
    assert [s.id for s in deduped] == [0, 1]


def test_deduplicate_is_case_sensitive(corpus_file):
    store = ingest([corpus_file(["a", "A"])])
    assert deduplicate(store).texts() == ["a", "A"]


def test_deduplicate_idempotent(corpus_file):
    store = ingest([corpus_file(["x", "y", "x", "z", "y"])])
    once = deduplicate(store)
    twice = deduplicate(once)
    assert once.to_jsonl() == twice.to_jsonl()


def test_deduplicate_global_across_files(corpus_file):
    a = corpus_file(["shared", "only a"], "a.txt")
    b = corpus_file(["shared", "only b"], "b.txt")
    deduped = deduplicate(ingest([a, b]))
    assert deduped.texts() == ["shared", "only a", "only b"]
    assert deduped.get(0).source == "a"


def test_ingest_then_dedup_deterministic_serialization(corpus_file):
    path = corpus_file(["one", "two", "one", "three"])
    first = deduplicate(ingest([path])).to_jsonl()
    second = deduplicate(ingest([path])).to_jsonl()
    assert first == second


def test_store_save_load_roundtrip(tmp_path, corpus_file):
    store = deduplicate(ingest([corpus_file(["p", "q", "r"])]))
    out = tmp_path / "store.jsonl"
    store.save(out)
    loaded = SentenceStore.load(out)
    assert loaded.texts() == store.texts()
    assert [s.id for s in loaded] == [s.id for s in store]


@given(st.lists(st.text(min_size=0, max_size=30)))
def test_dedup_leaves_unique_texts(lines):
    store = SentenceStore()
    for i, raw in enumerate(lines):
        norm = normalize_line(raw)
        if norm:
            from nluforge.corpus import Sentence

            store.sentences.append(Sentence(id=len(store.sentences), text=norm, source="t"))
    deduped = deduplicate(store)
    texts = deduped.texts()
    assert len(texts) == len(set(texts))
    assert [s.id for s in deduped] == list(range(len(deduped)))
    again = deduplicate(deduped)
    assert again.to_jsonl() == deduped.to_jsonl()
