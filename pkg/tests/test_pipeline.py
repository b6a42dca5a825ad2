from __future__ import annotations

import json
from pathlib import Path

import pytest

from nluforge.cli import main
from nluforge.config import PipelineConfig, config_digest, stage_digests
from nluforge.errors import ConfigError, TransportError
from nluforge.gateway import MockBackend, mock_complete
from nluforge.pipeline import run

from conftest import synthetic_sentences, write_corpus


def make_config(tmp_path, n=30, name="out", **overrides) -> PipelineConfig:
    corpus = write_corpus(tmp_path / "corpus.txt", synthetic_sentences(n))
    defaults = dict(input_paths=[corpus], out_dir=tmp_path / name, seed=42)
    defaults.update(overrides)
    return PipelineConfig(**defaults)


@pytest.fixture
def call_counter(monkeypatch):
    counter = {"calls": 0}
    original = MockBackend.complete

    def counting(self, request):
        counter["calls"] += 1
        return original(self, request)

    monkeypatch.setattr(MockBackend, "complete", counting)
    return counter


def test_run_produces_consistent_artifacts(tmp_path):
    config = make_config(tmp_path)
    result = run(config)
    manifest = result.manifest
    assert result.dataset_path.exists()
    assert result.manifest_path.exists()
    assert manifest.corpus_ingested == 30
    assert manifest.groups_sampled == 6
    assert manifest.groups_generated == manifest.groups_parsed == 6
    assert manifest.total_instances == manifest.instances_selected
    assert sum(manifest.task_distribution.values()) == manifest.total_instances
    manifest.validate()
    # dataset document count matches N
    text = result.dataset_path.read_text(encoding="utf-8")
    if manifest.total_instances:
        assert text.count("<|doc|>") == manifest.total_instances - 1


def test_rerun_skips_all_backend_calls(tmp_path, call_counter):
    config = make_config(tmp_path)
    first = run(config)
    assert call_counter["calls"] > 0
    call_counter["calls"] = 0
    second = run(config)
    assert call_counter["calls"] == 0, "a completed run must not re-request anything"
    assert second.manifest.dataset_digest == first.manifest.dataset_digest
    assert second.manifest == first.manifest


def test_threshold_out_of_range_fails_before_work(tmp_path, call_counter):
    config = make_config(tmp_path, threshold=11)
    with pytest.raises(ConfigError):
        run(config)
    assert call_counter["calls"] == 0


def test_interrupted_generation_resumes_without_rerequesting(tmp_path, monkeypatch):
    config = make_config(tmp_path, concurrency=1)
    original = MockBackend.complete

    # First run: the backend dies after 20 successful calls.
    budget = {"left": 20}

    def dying(self, request):
        if budget["left"] <= 0:
            raise TransportError("simulated outage")
        budget["left"] -= 1
        return original(self, request)

    monkeypatch.setattr(MockBackend, "complete", dying)
    with pytest.raises(TransportError):
        run(config)

    # Second run with a healthy backend: work already checkpointed or cached
    # must not reach the backend again, so the total cost stays strictly
    # below a fresh run's.
    counter = {"calls": 0}

    def counting(self, request):
        counter["calls"] += 1
        return original(self, request)

    monkeypatch.setattr(MockBackend, "complete", counting)
    result = run(config)
    full_cost = 6 * 2 + 6 * 2 * 5  # k generations + k*n scorings per group
    assert 0 < counter["calls"] <= full_cost - 20
    assert result.manifest.groups_sampled == 6

    # And a reference fresh run agrees byte for byte.
    monkeypatch.setattr(MockBackend, "complete", original)
    reference = run(make_config(tmp_path, name="ref"))
    assert reference.manifest.dataset_digest == result.manifest.dataset_digest


def test_concurrency_does_not_change_output(tmp_path):
    serial = run(make_config(tmp_path, name="serial", concurrency=1))
    parallel = run(make_config(tmp_path, name="parallel", concurrency=8))
    assert serial.manifest.dataset_digest == parallel.manifest.dataset_digest
    assert serial.manifest == parallel.manifest


def test_no_resume_recomputes_stages(tmp_path):
    config = make_config(tmp_path)
    run(config)
    events_path = config.out_dir / "events.jsonl"
    before = len(events_path.read_text().splitlines())
    fresh = make_config(tmp_path, resume=False)
    result = run(fresh)
    events = [
        json.loads(line)
        for line in events_path.read_text().splitlines()[before:]
    ]
    kinds = {e["event"] for e in events}
    assert "stage_completed" in kinds
    assert "run_resumed_complete" not in kinds
    assert result.manifest.dataset_digest


def test_changing_seed_invalidates_downstream_only(tmp_path):
    config = make_config(tmp_path)
    digests_a = stage_digests(config)
    config.seed = 43
    digests_b = stage_digests(config)
    assert digests_a["ingest"] == digests_b["ingest"]
    for stage in ("sample", "generate", "score", "curate", "write", "stats"):
        assert digests_a[stage] != digests_b[stage]


def test_changing_threshold_preserves_scoring(tmp_path):
    config = make_config(tmp_path)
    digests_a = stage_digests(config)
    config.threshold = 8.0
    digests_b = stage_digests(config)
    for stage in ("ingest", "sample", "generate", "score"):
        assert digests_a[stage] == digests_b[stage]
    assert digests_a["curate"] != digests_b["curate"]


def test_threshold_change_reuses_generation_calls(tmp_path, call_counter):
    config = make_config(tmp_path)
    run(config)
    baseline = call_counter["calls"]
    assert baseline > 0
    call_counter["calls"] = 0
    config2 = make_config(tmp_path, threshold=9.0)
    result = run(config2)
    assert call_counter["calls"] == 0, "re-filtering must not re-request completions"
    for inst_score in _selected_means(config2.out_dir):
        assert inst_score >= 9.0
    assert result.manifest.config_digest != ""


def _selected_means(out_dir: Path) -> list[float]:
    means = []
    for line in (out_dir / "audit.jsonl").read_text().splitlines():
        record = json.loads(line)
        if record["selected"] and record["filtered"] is False:
            means.append(record["mean"])
    return means


def test_audit_log_schema(tmp_path):
    config = make_config(tmp_path)
    run(config)
    records = [
        json.loads(line)
        for line in (config.out_dir / "audit.jsonl").read_text().splitlines()
    ]
    assert records, "audit log must not be empty"
    for record in records:
        assert set(record) == {
            "group_id", "candidate_index", "scores", "mean",
            "selected", "filtered", "task_key",
        }
        assert len(record["scores"]) == 5
    selected = [r for r in records if r["selected"]]
    assert len(selected) == 6, "exactly one selected candidate per scored group"


def test_empty_selection_still_writes_manifest(tmp_path):
    config = make_config(tmp_path, threshold=10.0, name="strict")
    result = run(config)
    if result.manifest.total_instances == 0:
        assert result.dataset_path.read_bytes() == b""
        assert result.manifest.empty


# --- cli ---------------------------------------------------------------


def test_cli_run_and_exit_code(tmp_path, capsys):
    corpus_dir = tmp_path / "in"
    corpus_dir.mkdir()
    write_corpus(corpus_dir / "corpus.txt", synthetic_sentences(30))
    code = main([
        "run",
        "--input-dir", str(corpus_dir),
        "--out", str(tmp_path / "out"),
        "--seed", "42",
        "--backend", "mock",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "pipeline summary" in out
    assert (tmp_path / "out" / "manifest.json").exists()


def test_cli_invalid_threshold(tmp_path, capsys):
    corpus_dir = tmp_path / "in"
    corpus_dir.mkdir()
    write_corpus(corpus_dir / "corpus.txt", synthetic_sentences(10))
    code = main([
        "run", "--input-dir", str(corpus_dir),
        "--out", str(tmp_path / "out"), "--threshold", "11",
    ])
    assert code == 2
    assert "threshold" in capsys.readouterr().err


def test_cli_missing_inputs(tmp_path, capsys):
    code = main(["run", "--out", str(tmp_path / "out")])
    assert code == 2


def test_cli_config_file_and_flag_precedence(tmp_path):
    corpus_dir = tmp_path / "in"
    corpus_dir.mkdir()
    write_corpus(corpus_dir / "corpus.txt", synthetic_sentences(10))
    config_file = tmp_path / "forge.yaml"
    config_file.write_text(
        f"input_dir: {corpus_dir}\nseed: 1\nthreshold: 8.5\n", encoding="utf-8"
    )
    from nluforge.cli import build_config, make_parser

    args = make_parser().parse_args([
        "run", "--config", str(config_file), "--seed", "2",
        "--out", str(tmp_path / "out"),
    ])
    config = build_config(args)
    assert config.seed == 2, "flag must beat config file"
    assert config.threshold == 8.5, "file must beat default"
    assert config.input_paths == [corpus_dir / "corpus.txt"]


def test_cli_rejects_unknown_config_keys(tmp_path):
    config_file = tmp_path / "forge.yaml"
    config_file.write_text("no_such_setting: 1\n", encoding="utf-8")
    from nluforge.cli import build_config, make_parser

    args = make_parser().parse_args(["run", "--config", str(config_file)])
    with pytest.raises(ConfigError):
        build_config(args)


def test_config_digest_is_path_independent(tmp_path):
    lines = synthetic_sentences(10)
    a = write_corpus(tmp_path / "a" / "c.txt", lines) if (tmp_path / "a").mkdir() is None else None
    b = write_corpus(tmp_path / "b" / "c.txt", lines) if (tmp_path / "b").mkdir() is None else None
    config_a = PipelineConfig(input_paths=[tmp_path / "a" / "c.txt"], out_dir=tmp_path / "oa")
    config_b = PipelineConfig(input_paths=[tmp_path / "b" / "c.txt"], out_dir=tmp_path / "ob")
    assert config_digest(config_a) == config_digest(config_b)
