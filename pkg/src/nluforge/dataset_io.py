"""Dataset serialization, run manifest, and JSONL stage checkpoints."""

from __future__ import annotations

import hashlib
import json
import logging
import statistics
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .curator import PretrainDataset
from .errors import CorruptCheckpoint

logger = logging.getLogger(__name__)

DOC_SEPARATOR = "<|doc|>"

CHECKPOINT_STAGES = ("groups", "generations", "scores", "curated")


def render_document(plan: str, example: str) -> str:
    """One pretraining document: the plan (reason) first, then the example."""
    return f"{plan}\n\n{example}"


def dataset_text(dataset: PretrainDataset) -> str:
    docs = [
        render_document(inst.plan, inst.example)
        for group in dataset.groups
        for inst in group.instances
    ]
    if not docs:
        return ""
    return f"\n{DOC_SEPARATOR}\n".join(docs) + "\n"


def write_dataset(dataset: PretrainDataset, path: Path | str) -> str:
    """Serialize the dataset and return the sha256 hex digest of the bytes."""
    data = dataset_text(dataset).encode("utf-8")
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


@dataclass
class Manifest:
    """Run summary: provenance, funnel counts, and dataset statistics.

    Counts shrink monotonically along the funnel: a group can only be
    scored if it was parsed, parsed if generated, generated if sampled;
    selected counts instances, of which there is at most one per group.
    """

    seed: int = 0
    config_digest: str = ""
    corpus_ingested: int = 0
    corpus_deduplicated: int = 0
    groups_sampled: int = 0
    groups_generated: int = 0
    groups_parsed: int = 0
    groups_scored: int = 0
    instances_selected: int = 0
    task_distribution: dict[str, int] = field(default_factory=dict)
    mean_paragraph_words: float = 0.0
    total_instances: int = 0
    dataset_digest: str = ""
    empty: bool = True

    def validate(self) -> None:
        counts = [
            self.corpus_ingested, self.corpus_deduplicated,
            self.groups_sampled, self.groups_generated,
            self.groups_parsed, self.groups_scored,
            self.instances_selected, self.total_instances,
        ]
        if any(c < 0 for c in counts):
            raise ValueError("manifest counts must be non-negative")
        if not (
            self.instances_selected <= self.groups_scored
            <= self.groups_parsed <= self.groups_generated <= self.groups_sampled
        ):
            raise ValueError("manifest counts are not monotone along the pipeline")
        if sum(self.task_distribution.values()) != self.total_instances:
            raise ValueError("task distribution does not sum to total_instances")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def save(self, path: Path | str) -> None:
        self.validate()
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "Manifest":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def compute_stats(dataset: PretrainDataset, **provenance) -> Manifest:
    """Dataset-derived statistics; pipeline provenance fields are passed
    through as keyword overrides (seed, funnel counts, digests)."""
    instances = [inst for group in dataset.groups for inst in group.instances]
    distribution = {g.task.display: len(g.instances) for g in dataset.groups}
    mean_words = (
        statistics.fmean(len(inst.example.split()) for inst in instances)
        if instances else 0.0
    )
    return Manifest(
        task_distribution=distribution,
        mean_paragraph_words=mean_words,
        total_instances=dataset.total_instances,
        empty=not instances,
        **provenance,
    )


class CheckpointStore:
    """Append-only JSONL checkpoints, one file per pipeline stage.

    Reads return every complete record; a torn final line (interrupted
    writer) is skipped with a warning, while a malformed line anywhere else
    means the file cannot be trusted and raises.
    """

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _check_stage(self, stage: str) -> None:
        if stage not in CHECKPOINT_STAGES:
            raise ValueError(f"unknown checkpoint stage '{stage}'")

    def path(self, stage: str) -> Path:
        self._check_stage(stage)
        return self.directory / f"{stage}.jsonl"

    def exists(self, stage: str) -> bool:
        return self.path(stage).exists()

    def clear(self, stage: str) -> None:
        self.path(stage).unlink(missing_ok=True)

    def append(self, stage: str, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
        with self._lock:
            with self.path(stage).open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()

    def write(self, stage: str, records) -> None:
        for record in records:
            self.append(stage, record)

    def read(self, stage: str) -> list[dict]:
        path = self.path(stage)
        if not path.exists():
            return []
        text = path.read_text(encoding="utf-8")
        lines = text.splitlines()
        records: list[dict] = []
        for idx, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                if idx == len(lines) - 1:
                    logger.warning("%s: ignoring torn final line", path)
                    break
                raise CorruptCheckpoint(str(path), idx + 1) from None
        return records
