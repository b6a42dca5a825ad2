"""nluforge: restructure a raw sentence corpus into a curated pretraining
dataset of generated NLU task examples with plans."""

from .config import PipelineConfig
from .corpus import Sentence, SentenceStore, deduplicate, ingest
from .curator import (
    CandidatePlan,
    CuratedSet,
    PretrainDataset,
    ScoredInstance,
    TaskGroup,
    assemble,
    filter_select,
    generate_candidates,
    group_by_task,
    score_candidate,
    select_best,
)
from .dataset_io import Manifest, compute_stats, write_dataset
from .gateway import ChatMessage, ChatRequest, ChatResponse, Gateway, GatewayConfig, mock_complete
from .parsing import (
    GenerationResult,
    TaskKey,
    normalize_task_name,
    parse_generation,
    parse_score,
)
from .pipeline import RunResult, run
from .prompting import PromptTemplate, RenderedPrompt, render_generation_prompt, render_score_prompt
from .sampler import SampleGroup, sample_groups

__version__ = "0.1.0"

__all__ = [
    "CandidatePlan",
    "ChatMessage",
    "ChatRequest",
    "ChatResponse",
    "CuratedSet",
    "Gateway",
    "GatewayConfig",
    "GenerationResult",
    "Manifest",
    "PipelineConfig",
    "PretrainDataset",
    "PromptTemplate",
    "RenderedPrompt",
    "RunResult",
    "SampleGroup",
    "ScoredInstance",
    "Sentence",
    "SentenceStore",
    "TaskGroup",
    "TaskKey",
    "assemble",
    "compute_stats",
    "deduplicate",
    "filter_select",
    "generate_candidates",
    "group_by_task",
    "ingest",
    "mock_complete",
    "normalize_task_name",
    "parse_generation",
    "parse_score",
    "render_generation_prompt",
    "render_score_prompt",
    "run",
    "sample_groups",
    "score_candidate",
    "select_best",
    "write_dataset",
]
