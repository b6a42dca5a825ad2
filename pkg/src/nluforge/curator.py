"""Per-group generation and scoring orchestration, best-plan selection,
threshold filtering, task grouping, and final dataset assembly."""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import SentenceStore
from .errors import (
    AllCandidatesFailed,
    DuplicateTaskKey,
    EmptyCandidateList,
    ParseError,
    Unscorable,
)
from .gateway import Gateway
from .parsing import GenerationResult, TaskKey, normalize_task_name, parse_generation, parse_score
from .prompting import PromptTemplate, render_generation_prompt, render_score_prompt
from .sampler import SampleGroup

EventHook = Callable[[dict], None]

DEFAULT_PLANS_PER_GROUP = 2
DEFAULT_SCORES_PER_PLAN = 5
DEFAULT_PARSE_RETRIES = 2
DEFAULT_THRESHOLD = 7.0


@dataclass(frozen=True)
class Candidate:
    """A successfully parsed generation attempt for one group."""

    index: int
    result: GenerationResult
    task: TaskKey


@dataclass(frozen=True)
class CandidatePlan:
    """A candidate together with its coherence scores.

    ``index`` is the generation order within the group and doubles as the
    tie-break key in :func:`select_best`.
    """

    index: int
    generation: GenerationResult
    task: TaskKey
    scores: tuple[int, ...]
    mean_score: float

    @classmethod
    def from_scores(
        cls, candidate: Candidate, scores: Sequence[int]
    ) -> "CandidatePlan":
        if not scores:
            raise ValueError("a candidate plan needs at least one score")
        if any(not 1 <= s <= 10 for s in scores):
            raise ValueError(f"scores out of range: {scores}")
        return cls(
            index=candidate.index,
            generation=candidate.result,
            task=candidate.task,
            scores=tuple(scores),
            mean_score=statistics.fmean(scores),
        )


@dataclass(frozen=True)
class ScoredInstance:
    """One selected (paragraph, plan) pair with its scoring provenance."""

    group_id: int
    example: str
    plan: str
    task: TaskKey
    labels: tuple[str, ...]
    mean_score: float
    scores: tuple[int, ...]


@dataclass(frozen=True)
class CuratedSet:
    instances: tuple[ScoredInstance, ...]
    threshold: float


@dataclass(frozen=True)
class TaskGroup:
    task: TaskKey
    instances: tuple[ScoredInstance, ...]


@dataclass(frozen=True)
class PretrainDataset:
    groups: tuple[TaskGroup, ...]
    total_instances: int


def _emit(on_event: EventHook | None, record: dict) -> None:
    if on_event is not None:
        on_event(record)


def generate_candidates(
    group: SampleGroup,
    store: SentenceStore,
    gateway: Gateway,
    *,
    k: int = DEFAULT_PLANS_PER_GROUP,
    parse_retries: int = DEFAULT_PARSE_RETRIES,
    template: PromptTemplate | None = None,
    on_event: EventHook | None = None,
) -> list[Candidate]:
    """Request k independent generations for the group and parse each one.

    A malformed response is re-requested with a fresh sample index up to
    ``parse_retries`` times, then that candidate slot is given up. Sample
    indices are laid out so no two (slot, attempt) pairs collide:
    slot i, attempt a -> i + k * a.
    """
    prompt = render_generation_prompt(group, store, template)
    candidates: list[Candidate] = []
    for i in range(k):
        for attempt in range(parse_retries + 1):
            request = gateway.build_request(prompt.text, sample_index=i + k * attempt)
            response = gateway.complete(request)
            try:
                result = parse_generation(response.content)
                task = normalize_task_name(result.task_raw)
            except ParseError as exc:
                _emit(on_event, {
                    "event": "generation_parse_failure",
                    "group_id": group.group_id,
                    "candidate_index": i,
                    "attempt": attempt,
                    "reason": str(exc),
                })
                continue
            candidates.append(Candidate(index=i, result=result, task=task))
            break
    if not candidates:
        raise AllCandidatesFailed(group.group_id)
    return candidates


def score_candidate(
    candidate: Candidate,
    gateway: Gateway,
    *,
    n: int = DEFAULT_SCORES_PER_PLAN,
    parse_retries: int = DEFAULT_PARSE_RETRIES,
    template: PromptTemplate | None = None,
    group_id: int | None = None,
    on_event: EventHook | None = None,
) -> CandidatePlan:
    """Draw n independent coherence scores for the candidate's paragraph.

    Every slot must yield a parseable score (after retries) or the whole
    candidate is unscorable; a partial mean would silently change the
    filtering semantics.
    """
    prompt = render_score_prompt(
        candidate.result.paragraph, template,
        provenance=(group_id, candidate.index) if group_id is not None else None,
    )
    scores: list[int] = []
    for slot in range(n):
        got: int | None = None
        for attempt in range(parse_retries + 1):
            request = gateway.build_request(prompt.text, sample_index=slot + n * attempt)
            response = gateway.complete(request)
            try:
                got = parse_score(response.content)
                break
            except ParseError as exc:
                _emit(on_event, {
                    "event": "score_parse_failure",
                    "group_id": group_id,
                    "candidate_index": candidate.index,
                    "slot": slot,
                    "attempt": attempt,
                    "reason": str(exc),
                })
        if got is None:
            raise Unscorable(group_id if group_id is not None else -1, candidate.index)
        scores.append(got)
    return CandidatePlan.from_scores(candidate, scores)


def select_best(candidates: Sequence[CandidatePlan]) -> CandidatePlan:
    """Argmax by mean score; an exact tie goes to the earliest-generated."""
    if not candidates:
        raise EmptyCandidateList("no scored candidates to select from")
    best = candidates[0]
    for cand in candidates[1:]:
        if cand.mean_score > best.mean_score:
            best = cand
        elif cand.mean_score == best.mean_score and cand.index < best.index:
            best = cand
    return best


def build_instance(group_id: int, plan: CandidatePlan) -> ScoredInstance:
    return ScoredInstance(
        group_id=group_id,
        example=plan.generation.paragraph,
        plan=plan.generation.plan,
        task=plan.task,
        labels=plan.generation.labels,
        mean_score=plan.mean_score,
        scores=plan.scores,
    )


def filter_select(
    instances: Sequence[ScoredInstance],
    threshold: float = DEFAULT_THRESHOLD,
) -> CuratedSet:
    """Keep exactly the instances whose mean score clears the threshold
    (inclusive), preserving input order."""
    if not 1.0 <= threshold <= 10.0:
        raise ValueError(f"threshold {threshold} outside [1, 10]")
    kept = tuple(inst for inst in instances if inst.mean_score >= threshold)
    return CuratedSet(instances=kept, threshold=threshold)


def group_by_task(selected: CuratedSet) -> list[TaskGroup]:
    """Partition by normalized task key; groups in lexicographic key order,
    members in ascending group_id order."""
    buckets: dict[str, list[ScoredInstance]] = {}
    for inst in selected.instances:
        buckets.setdefault(inst.task.key, []).append(inst)
    groups = []
    for key in sorted(buckets):
        members = sorted(buckets[key], key=lambda inst: inst.group_id)
        groups.append(TaskGroup(task=members[0].task, instances=tuple(members)))
    return groups


def assemble(groups: Sequence[TaskGroup]) -> PretrainDataset:
    """Concatenate the task groups into the final dataset."""
    seen: set[str] = set()
    for group in groups:
        if group.task.key in seen:
            raise DuplicateTaskKey(group.task.key)
        seen.add(group.task.key)
    total = sum(len(g.instances) for g in groups)
    return PretrainDataset(groups=tuple(groups), total_instances=total)
