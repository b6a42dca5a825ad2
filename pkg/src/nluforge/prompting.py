"""Prompt templates and rendering for generation and scoring requests."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .corpus import SentenceStore
from .errors import EmptyParagraph, TemplateError, UnknownSentenceId
from .sampler import SampleGroup

GENERATION = "generation"
SCORING = "scoring"

PLACEHOLDERS = {GENERATION: "{input}", SCORING: "{paragraph}"}

DEFAULT_GENERATION_TEMPLATE = """\
Use the given sentences to create an example paragraph of an NLU task and its corresponding labels. The 5 sentences are: {input}.
Make a plan then write and determine. Your output should be of the following format:
Plan:
Your plan here.
Paragraph:
Your paragraph here.
Task:
[Only the task name here, without additional information.]
Labels:
[Only the labels here, without additional information.]"""

DEFAULT_SCORING_TEMPLATE = """\
Analyze the following paragraph, then at the last line conclude "Thus the coherency score is {s}", where s is an integer from 1 to 10.

{paragraph}"""

SECTION_HEADERS = ("Plan", "Paragraph", "Task", "Labels")

# Marker phrase used to recognize scoring-shaped prompts. Part of the default
# scoring instruction, never present in generation prompts.
SCORE_CONCLUSION_PHRASE = "Thus the coherency score is"


@dataclass(frozen=True)
class PromptTemplate:
    """A template with exactly one substitution placeholder.

    The literal ``{s}`` in the scoring instruction is text the model is told
    to emit, not a placeholder, so substitution uses ``str.replace`` on the
    single named placeholder rather than ``str.format``.
    """

    name: str
    body: str

    def __post_init__(self) -> None:
        if self.name not in PLACEHOLDERS:
            raise TemplateError(f"unknown template name '{self.name}'")
        marker = PLACEHOLDERS[self.name]
        count = self.body.count(marker)
        if count != 1:
            raise TemplateError(
                f"{self.name} template must contain {marker} exactly once, found {count}"
            )

    def render(self, value: str) -> str:
        return self.body.replace(PLACEHOLDERS[self.name], value)


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    kind: str
    provenance: int | tuple[int, int] | None = None


def default_templates() -> dict[str, PromptTemplate]:
    return {
        GENERATION: PromptTemplate(GENERATION, DEFAULT_GENERATION_TEMPLATE),
        SCORING: PromptTemplate(SCORING, DEFAULT_SCORING_TEMPLATE),
    }


def load_templates(template_dir: Path | str | None) -> dict[str, PromptTemplate]:
    """Default templates, with per-name overrides from ``<dir>/<name>.txt``."""
    templates = default_templates()
    if template_dir is None:
        return templates
    for name in (GENERATION, SCORING):
        override = Path(template_dir) / f"{name}.txt"
        if override.exists():
            templates[name] = PromptTemplate(name, override.read_text(encoding="utf-8"))
    return templates


def render_generation_prompt(
    group: SampleGroup,
    store: SentenceStore,
    template: PromptTemplate | None = None,
) -> RenderedPrompt:
    """Substitute the group's five sentences as a numbered list, one per line."""
    template = template or default_templates()[GENERATION]
    texts = []
    for sid in group.sentence_ids:
        try:
            texts.append(store.get(sid).text)
        except KeyError:
            raise UnknownSentenceId(sid) from None
    numbered = "\n".join(f"{i}. {text}" for i, text in enumerate(texts, start=1))
    return RenderedPrompt(
        text=template.render("\n" + numbered),
        kind=GENERATION,
        provenance=group.group_id,
    )


def render_score_prompt(
    paragraph: str,
    template: PromptTemplate | None = None,
    provenance: int | tuple[int, int] | None = None,
) -> RenderedPrompt:
    if not paragraph.strip():
        raise EmptyParagraph("cannot score an empty paragraph")
    template = template or default_templates()[SCORING]
    return RenderedPrompt(
        text=template.render(paragraph),
        kind=SCORING,
        provenance=provenance,
    )
