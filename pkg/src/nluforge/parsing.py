"""Parsers for model text outputs: the four-section generation format, the
coherence-score conclusion line, and task-name normalization."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import (
    DuplicateSection,
    EmptyAfterNormalization,
    EmptySection,
    MissingSection,
    ScoreLineMissing,
    ScoreOutOfRange,
)

SECTION_NAMES = ("Plan", "Paragraph", "Task", "Labels")

# Headers must start a line; matching is case-insensitive and anything after
# the colon on the same line counts as content.
_HEADER_RE = re.compile(r"^(Plan|Paragraph|Task|Labels):[ \t]*(.*)$", re.IGNORECASE)

_SCORE_LINE_RE = re.compile(
    r"^\s*Thus the coherency score is (\d+)\.?\s*$", re.IGNORECASE
)

_ENUM_MARKER_RE = re.compile(r"^(?:\d+\.\s+|-\s+)")

SCORE_MIN = 1
SCORE_MAX = 10


@dataclass(frozen=True)
class GenerationResult:
    """Parsed four-section output: plan, paragraph, task name, labels."""

    plan: str
    paragraph: str
    task_raw: str
    labels: tuple[str, ...]


@dataclass(frozen=True)
class TaskKey:
    """Grouping key for a task name: normalized key plus cleaned display form."""

    key: str
    display: str


def _strip_brackets(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == "[" and text[-1] == "]":
        text = text[1:-1].strip()
    return text


def parse_generation(text: str) -> GenerationResult:
    """Split a model response on the four section headers, in any order.

    Each section's content runs from its header to the next header (or end
    of text). Task and Labels contents are unwrapped from one layer of
    square brackets; Labels is split on newlines with leading enumeration
    markers removed.
    """
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in text.splitlines():
        m = _HEADER_RE.match(line)
        if m:
            name = m.group(1).capitalize()
            if name in sections:
                raise DuplicateSection(name)
            current = sections[name] = []
            rest = m.group(2)
            if rest:
                current.append(rest)
        elif current is not None:
            current.append(line)
    for name in SECTION_NAMES:
        if name not in sections:
            raise MissingSection(name)

    plan = "\n".join(sections["Plan"]).strip()
    paragraph = "\n".join(sections["Paragraph"]).strip()
    task_raw = _strip_brackets("\n".join(sections["Task"]))
    labels_block = _strip_brackets("\n".join(sections["Labels"]))

    if not plan:
        raise EmptySection("Plan")
    if not paragraph:
        raise EmptySection("Paragraph")
    if not task_raw:
        raise EmptySection("Task")

    labels = []
    for raw in labels_block.splitlines():
        label = _ENUM_MARKER_RE.sub("", raw.strip()).strip()
        if label:
            labels.append(label)

    return GenerationResult(
        plan=plan, paragraph=paragraph, task_raw=task_raw, labels=tuple(labels)
    )


def render_generation(result: GenerationResult) -> str:
    """Canonical inverse of :func:`parse_generation` for well-formed results."""
    labels_block = "[" + "\n".join(result.labels) + "]"
    return (
        f"Plan:\n{result.plan}\n"
        f"Paragraph:\n{result.paragraph}\n"
        f"Task:\n[{result.task_raw}]\n"
        f"Labels:\n{labels_block}"
    )


def parse_score(text: str) -> int:
    """Read the concluding coherence-score line, scanning bottom-up.

    Accepts exactly 'Thus the coherency score is <int>' (case-insensitive,
    optional trailing period) as a whole line; no fuzzy fallback.
    """
    for line in reversed(text.splitlines()):
        m = _SCORE_LINE_RE.match(line)
        if m:
            score = int(m.group(1))
            if not SCORE_MIN <= score <= SCORE_MAX:
                raise ScoreOutOfRange(score)
            return score
    raise ScoreLineMissing("no coherency score conclusion line found")


def normalize_task_name(task_raw: str) -> TaskKey:
    """Clean a free-text task name into a display form and lowercase key."""
    display = _strip_brackets(task_raw)
    if len(display) >= 2 and display[0] == display[-1] and display[0] in "\"'":
        display = display[1:-1].strip()
    display = display.rstrip(".").strip()
    display = re.sub(r"\s+", " ", display)
    if not display:
        raise EmptyAfterNormalization(f"task name '{task_raw}' is empty once cleaned")
    return TaskKey(key=display.lower(), display=display)
