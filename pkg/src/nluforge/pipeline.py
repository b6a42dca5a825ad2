"""Stage orchestration: ingest, sample, generate, score, curate, write, stats.

Each stage records a digest of everything its output depends on; a rerun
skips stages whose digest still matches and resumes at the first stale or
incomplete one. The generate and score stages additionally checkpoint per
work item, so an interrupted run never re-requests completed groups.
"""

from __future__ import annotations

import json
import statistics
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from .config import PipelineConfig, config_digest, stage_digests
from .corpus import SentenceStore, deduplicate, ingest
from .curator import (
    Candidate,
    CandidatePlan,
    CuratedSet,
    ScoredInstance,
    assemble,
    build_instance,
    filter_select,
    generate_candidates,
    group_by_task,
    score_candidate,
    select_best,
)
from .dataset_io import CheckpointStore, Manifest, compute_stats, write_dataset
from .errors import AllCandidatesFailed, Unscorable
from .gateway import Gateway
from .parsing import GenerationResult, TaskKey
from .prompting import GENERATION, SCORING
from .sampler import SampleGroup, sample_groups


class EventLog:
    """Append-only JSONL diagnostics log; safe for concurrent writers."""

    def __init__(self, path: Path):
        self.path = path
        self._lock = threading.Lock()
        path.parent.mkdir(parents=True, exist_ok=True)

    def emit(self, event: str, **fields) -> None:
        record = {"ts": round(time.time(), 3), "event": event, **fields}
        line = json.dumps(record, ensure_ascii=False, sort_keys=True)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def hook(self, record: dict) -> None:
        self.emit(record.pop("event", "note"), **record)


class RunState:
    """Per-stage completion markers persisted as a small JSON file."""

    def __init__(self, path: Path, data: dict | None = None):
        self.path = path
        self.data = data if data is not None else {"stages": {}}

    @classmethod
    def load(cls, path: Path) -> "RunState":
        if path.exists():
            try:
                return cls(path, json.loads(path.read_text(encoding="utf-8")))
            except (ValueError, KeyError):
                pass
        return cls(path)

    def is_complete(self, stage: str, digest: str) -> bool:
        entry = self.data["stages"].get(stage)
        return bool(entry) and entry.get("digest") == digest

    def info(self, stage: str) -> dict:
        entry = self.data["stages"].get(stage) or {}
        return entry.get("info") or {}

    def mark(self, stage: str, digest: str, info: dict | None = None) -> None:
        self.data["stages"][stage] = {"digest": digest, "info": info or {}}
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.data, indent=2, sort_keys=True), encoding="utf-8")
        tmp.replace(self.path)

    def reset(self) -> None:
        self.data = {"stages": {}}
        self.path.unlink(missing_ok=True)


@dataclass
class RunResult:
    manifest: Manifest
    summary: str
    dataset_path: Path
    manifest_path: Path


def _claim(ckpt: CheckpointStore, stage: str, digest: str) -> bool:
    """Mark an incremental stage's checkpoint as belonging to ``digest``.

    Returns True when existing records may be reused; otherwise the stale
    checkpoint is cleared and a fresh claim written.
    """
    marker = ckpt.directory / f"{stage}.digest"
    if marker.exists() and marker.read_text(encoding="utf-8") == digest and ckpt.exists(stage):
        return True
    ckpt.clear(stage)
    marker.write_text(digest, encoding="utf-8")
    return False


def _candidate_from_record(rec: dict) -> Candidate:
    return Candidate(
        index=rec["index"],
        result=GenerationResult(
            plan=rec["plan"],
            paragraph=rec["paragraph"],
            task_raw=rec["task_raw"],
            labels=tuple(rec["labels"]),
        ),
        task=TaskKey(key=rec["task_key"], display=rec["task_display"]),
    )


def _instance_from_record(rec: dict) -> ScoredInstance:
    return ScoredInstance(
        group_id=rec["group_id"],
        example=rec["example"],
        plan=rec["plan"],
        task=TaskKey(key=rec["task_key"], display=rec["task_display"]),
        labels=tuple(rec["labels"]),
        mean_score=rec["mean_score"],
        scores=tuple(rec["scores"]),
    )


def _instance_to_record(inst: ScoredInstance) -> dict:
    return {
        "group_id": inst.group_id,
        "example": inst.example,
        "plan": inst.plan,
        "task_key": inst.task.key,
        "task_display": inst.task.display,
        "labels": list(inst.labels),
        "mean_score": inst.mean_score,
        "scores": list(inst.scores),
    }


def run(config: PipelineConfig) -> RunResult:
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    events = EventLog(out / "events.jsonl")
    ckpt = CheckpointStore(out / "checkpoints")
    state = RunState.load(out / "state.json")
    digests = stage_digests(config)
    templates = config.templates()

    if not config.resume:
        state.reset()
        for stage in ("groups", "generations", "scores", "curated"):
            ckpt.clear(stage)
        for marker in ckpt.directory.glob("*.digest"):
            marker.unlink()

    corpus_path = out / "corpus.jsonl"
    dataset_path = out / "dataset.txt"
    manifest_path = out / "manifest.json"
    audit_path = out / "audit.jsonl"

    # Fast path: everything in this configuration has already been produced.
    if (
        state.is_complete("stats", digests["stats"])
        and manifest_path.exists() and dataset_path.exists()
    ):
        events.emit("run_resumed_complete")
        manifest = Manifest.load(manifest_path)
        return RunResult(manifest, _summary(manifest, state), dataset_path, manifest_path)

    # --- ingest -------------------------------------------------------
    if state.is_complete("ingest", digests["ingest"]) and corpus_path.exists():
        store = SentenceStore.load(corpus_path)
        events.emit("stage_skipped", stage="ingest")
    else:
        raw = ingest(config.input_paths)
        store = deduplicate(raw)
        store.save(corpus_path)
        state.mark("ingest", digests["ingest"], {
            "ingested": len(raw),
            "deduplicated": len(store),
            "files": [[m.tag, m.ingested, m.dropped] for m in raw.source_manifest],
        })
        events.emit("stage_completed", stage="ingest",
                    ingested=len(raw), deduplicated=len(store))

    # --- sample -------------------------------------------------------
    if state.is_complete("sample", digests["sample"]) and ckpt.exists("groups"):
        groups = [
            SampleGroup(group_id=r["group_id"], sentence_ids=tuple(r["sentence_ids"]))
            for r in ckpt.read("groups")
        ]
        events.emit("stage_skipped", stage="sample")
    else:
        groups = sample_groups(store, config.seed, config.max_groups)
        ckpt.clear("groups")
        ckpt.write("groups", (
            {"group_id": g.group_id, "sentence_ids": list(g.sentence_ids)}
            for g in groups
        ))
        state.mark("sample", digests["sample"], {"sampled": len(groups)})
        events.emit("stage_completed", stage="sample", groups=len(groups))

    gateway = Gateway(config.gateway_config())
    try:
        # --- generate ---------------------------------------------------
        gen_records = _stage_generate(
            config, store, groups, gateway, templates, ckpt, state, events, digests,
        )

        # --- score ------------------------------------------------------
        score_records = _stage_score(
            config, gen_records, gateway, templates, ckpt, state, events, digests,
        )
    finally:
        gateway.close()

    # --- curate -------------------------------------------------------
    if state.is_complete("curate", digests["curate"]) and ckpt.exists("curated"):
        instances = [_instance_from_record(r) for r in ckpt.read("curated")]
        selected = CuratedSet(instances=tuple(instances), threshold=config.threshold)
        events.emit("stage_skipped", stage="curate")
    else:
        selected = _stage_curate(
            config, gen_records, score_records, ckpt, state, events, digests, audit_path,
        )

    dataset = assemble(group_by_task(selected))

    # --- write --------------------------------------------------------
    dataset_digest = write_dataset(dataset, dataset_path)
    state.mark("write", digests["write"], {"dataset_digest": dataset_digest})
    events.emit("stage_completed", stage="write", digest=dataset_digest)

    # --- stats --------------------------------------------------------
    manifest = compute_stats(
        dataset,
        seed=config.seed,
        config_digest=config_digest(config),
        corpus_ingested=state.info("ingest").get("ingested", 0),
        corpus_deduplicated=state.info("ingest").get("deduplicated", 0),
        groups_sampled=state.info("sample").get("sampled", 0),
        groups_generated=state.info("generate").get("generated", 0),
        groups_parsed=state.info("generate").get("parsed", 0),
        groups_scored=state.info("score").get("scored_groups", 0),
        instances_selected=dataset.total_instances,
        dataset_digest=dataset_digest,
    )
    manifest.save(manifest_path)
    state.mark("stats", digests["stats"])
    events.emit("stage_completed", stage="stats")
    return RunResult(manifest, _summary(manifest, state), dataset_path, manifest_path)


def _stage_generate(config, store, groups, gateway, templates, ckpt, state, events, digests):
    digest = digests["generate"]
    if state.is_complete("generate", digest) and ckpt.exists("generations"):
        events.emit("stage_skipped", stage="generate")
        return sorted(ckpt.read("generations"), key=lambda r: r["group_id"])

    reuse = _claim(ckpt, "generations", digest)
    existing = {r["group_id"]: r for r in ckpt.read("generations")} if reuse else {}
    pending = [g for g in groups if g.group_id not in existing]
    events.emit("stage_started", stage="generate",
                pending=len(pending), reused=len(existing))

    def work(group: SampleGroup) -> dict:
        try:
            candidates = generate_candidates(
                group, store, gateway,
                k=config.plans_per_group,
                parse_retries=config.parse_retries,
                template=templates[GENERATION],
                on_event=events.hook,
            )
        except AllCandidatesFailed:
            events.emit("group_dropped", stage="generate",
                        group_id=group.group_id, reason="all_candidates_failed")
            return {"group_id": group.group_id, "dropped": "all_candidates_failed",
                    "candidates": []}
        return {
            "group_id": group.group_id,
            "dropped": None,
            "candidates": [
                {
                    "index": c.index,
                    "plan": c.result.plan,
                    "paragraph": c.result.paragraph,
                    "task_raw": c.result.task_raw,
                    "labels": list(c.result.labels),
                    "task_key": c.task.key,
                    "task_display": c.task.display,
                }
                for c in candidates
            ],
        }

    records = dict(existing)
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        futures = {pool.submit(work, g): g for g in pending}
        for future in as_completed(futures):
            record = future.result()
            ckpt.append("generations", record)
            records[record["group_id"]] = record

    ordered = [records[gid] for gid in sorted(records)]
    state.mark("generate", digest, {
        "generated": len(ordered),
        "parsed": sum(1 for r in ordered if r["candidates"]),
        "dropped": sum(1 for r in ordered if r["dropped"]),
    })
    events.emit("stage_completed", stage="generate", groups=len(ordered))
    return ordered


def _stage_score(config, gen_records, gateway, templates, ckpt, state, events, digests):
    digest = digests["score"]
    if state.is_complete("score", digest) and ckpt.exists("scores"):
        events.emit("stage_skipped", stage="score")
        return {(r["group_id"], r["candidate_index"]): r for r in ckpt.read("scores")}

    reuse = _claim(ckpt, "scores", digest)
    existing = (
        {(r["group_id"], r["candidate_index"]): r for r in ckpt.read("scores")}
        if reuse else {}
    )
    pending = [
        (rec["group_id"], cand)
        for rec in gen_records
        for cand in rec["candidates"]
        if (rec["group_id"], cand["index"]) not in existing
    ]
    events.emit("stage_started", stage="score",
                pending=len(pending), reused=len(existing))

    def work(group_id: int, cand_rec: dict) -> dict:
        candidate = _candidate_from_record(cand_rec)
        try:
            plan = score_candidate(
                candidate, gateway,
                n=config.scores_per_plan,
                parse_retries=config.parse_retries,
                template=templates[SCORING],
                group_id=group_id,
                on_event=events.hook,
            )
        except Unscorable:
            events.emit("candidate_unscorable", group_id=group_id,
                        candidate_index=candidate.index)
            return {"group_id": group_id, "candidate_index": candidate.index,
                    "scores": None, "unscorable": True}
        return {"group_id": group_id, "candidate_index": candidate.index,
                "scores": list(plan.scores), "unscorable": False}

    records = dict(existing)
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        futures = [pool.submit(work, gid, cand) for gid, cand in pending]
        for future in as_completed(futures):
            record = future.result()
            ckpt.append("scores", record)
            records[(record["group_id"], record["candidate_index"])] = record

    scored_groups = {gid for (gid, _), r in records.items() if not r["unscorable"]}
    state.mark("score", digest, {
        "scored_candidates": sum(1 for r in records.values() if not r["unscorable"]),
        "unscorable_candidates": sum(1 for r in records.values() if r["unscorable"]),
        "scored_groups": len(scored_groups),
    })
    events.emit("stage_completed", stage="score", candidates=len(records))
    return records


def _stage_curate(config, gen_records, score_records, ckpt, state, events, digests, audit_path):
    """Pure selection and filtering over the checkpointed per-group results.

    Order never depends on worker completion: records are processed in
    ascending group_id order and the winner rebuilt from frozen data.
    """
    instances: list[ScoredInstance] = []
    audit: list[dict] = []
    drops = Counter()
    for rec in sorted(gen_records, key=lambda r: r["group_id"]):
        gid = rec["group_id"]
        if rec["dropped"]:
            drops[rec["dropped"]] += 1
            continue
        plans: list[CandidatePlan] = []
        for cand_rec in rec["candidates"]:
            score_rec = score_records.get((gid, cand_rec["index"]))
            if score_rec is None or score_rec["unscorable"]:
                continue
            plans.append(CandidatePlan.from_scores(
                _candidate_from_record(cand_rec), score_rec["scores"],
            ))
        if not plans:
            drops["unscorable"] += 1
            events.emit("group_dropped", stage="curate", group_id=gid,
                        reason="unscorable")
            continue
        best = select_best(plans)
        instance = build_instance(gid, best)
        kept = instance.mean_score >= config.threshold
        for plan in plans:
            is_best = plan.index == best.index
            audit.append({
                "group_id": gid,
                "candidate_index": plan.index,
                "scores": list(plan.scores),
                "mean": plan.mean_score,
                "selected": is_best,
                "filtered": (not kept) if is_best else None,
                "task_key": plan.task.key,
            })
        instances.append(instance)

    selected = filter_select(instances, config.threshold)
    drops["below_threshold"] = len(instances) - len(selected.instances)

    with audit_path.open("w", encoding="utf-8") as fh:
        for record in audit:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")

    ckpt.clear("curated")
    ckpt.write("curated", (_instance_to_record(i) for i in selected.instances))
    state.mark("curate", digests["curate"], {
        "scored_instances": len(instances),
        "selected": len(selected.instances),
        "drops": dict(drops),
    })
    events.emit("stage_completed", stage="curate",
                selected=len(selected.instances), drops=dict(drops))
    return selected


def _summary(manifest: Manifest, state: RunState) -> str:
    drops = state.info("curate").get("drops", {})
    lines = [
        "pipeline summary",
        f"  corpus: {manifest.corpus_ingested} sentences ingested, "
        f"{manifest.corpus_deduplicated} after deduplication",
        f"  groups: {manifest.groups_sampled} sampled, "
        f"{manifest.groups_generated} generated, {manifest.groups_parsed} parsed, "
        f"{manifest.groups_scored} scored",
        f"  instances: {manifest.instances_selected} selected, N = {manifest.total_instances}",
    ]
    if drops:
        drop_text = ", ".join(f"{k}: {v}" for k, v in sorted(drops.items()))
        lines.append(f"  dropped: {drop_text}")
    if manifest.task_distribution:
        # Single-occurrence tasks collapse into an "others" bucket here; the
        # manifest itself keeps exact per-task counts.
        shown = {k: v for k, v in manifest.task_distribution.items() if v > 1}
        singles = sum(1 for v in manifest.task_distribution.values() if v == 1)
        parts = [
            f"{name}: {count}"
            for name, count in sorted(shown.items(), key=lambda kv: (-kv[1], kv[0]))
        ]
        if singles:
            parts.append(f"others: {singles}")
        lines.append(f"  tasks: {', '.join(parts)}")
    lines.append(f"  mean paragraph words: {manifest.mean_paragraph_words:.2f}")
    lines.append(f"  dataset digest: {manifest.dataset_digest or '(empty)'}")
    return "\n".join(lines)
