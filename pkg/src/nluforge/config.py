"""Pipeline configuration and the stage-digest chain used for resume."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .curator import (
    DEFAULT_PARSE_RETRIES,
    DEFAULT_PLANS_PER_GROUP,
    DEFAULT_SCORES_PER_PLAN,
    DEFAULT_THRESHOLD,
)
from .errors import ConfigError, FileUnreadable
from .gateway import DEFAULT_API_KEY_ENV, DEFAULT_MODEL, GatewayConfig
from .prompting import GENERATION, SCORING, PromptTemplate, load_templates

STAGES = ("ingest", "sample", "generate", "score", "curate", "write", "stats")


@dataclass
class PipelineConfig:
    input_paths: list[Path] = field(default_factory=list)
    out_dir: Path = Path("out")
    seed: int = 42
    backend: str = "mock"
    base_url: str = "https://api.openai.com/v1"
    model: str = DEFAULT_MODEL
    temperature: float = 1.0
    max_tokens: int = 1024
    api_key_env: str = DEFAULT_API_KEY_ENV
    max_retries: int = 3
    max_in_flight: int = 4
    request_timeout: float = 60.0
    threshold: float = DEFAULT_THRESHOLD
    plans_per_group: int = DEFAULT_PLANS_PER_GROUP
    scores_per_plan: int = DEFAULT_SCORES_PER_PLAN
    parse_retries: int = DEFAULT_PARSE_RETRIES
    max_groups: int | None = None
    concurrency: int = 4
    template_dir: Path | None = None
    cache_enabled: bool = True
    resume: bool = True

    def validate(self) -> None:
        if not self.input_paths:
            raise ConfigError("no input files given")
        for p in self.input_paths:
            if not Path(p).is_file():
                raise ConfigError(f"input file not found: {p}")
        if not 1.0 <= self.threshold <= 10.0:
            raise ConfigError(f"threshold {self.threshold} outside [1, 10]")
        if self.plans_per_group < 1:
            raise ConfigError("plans_per_group must be >= 1")
        if self.scores_per_plan < 1:
            raise ConfigError("scores_per_plan must be >= 1")
        if self.parse_retries < 0:
            raise ConfigError("parse_retries must be >= 0")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if self.max_groups is not None and self.max_groups < 1:
            raise ConfigError("max_groups must be positive when given")
        if self.backend not in ("mock", "remote"):
            raise ConfigError(f"unknown backend '{self.backend}'")
        if not -(2**63) <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")

    def templates(self) -> dict[str, PromptTemplate]:
        return load_templates(self.template_dir)

    def gateway_config(self) -> GatewayConfig:
        return GatewayConfig(
            backend=self.backend,
            base_url=self.base_url,
            model=self.model,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            max_retries=self.max_retries,
            max_in_flight=self.max_in_flight,
            timeout=self.request_timeout,
            cache_dir=(Path(self.out_dir) / "cache") if self.cache_enabled else None,
            api_key_env=self.api_key_env,
        )


def _digest(*parts: str) -> str:
    return hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()


def file_digest(path: Path | str) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as exc:
        raise FileUnreadable(str(path), str(exc)) from exc


def inputs_digest(paths: list[Path]) -> str:
    """Content digest of the ordered input set; path-location independent."""
    entries = [[Path(p).stem, file_digest(p)] for p in paths]
    return _digest("inputs", json.dumps(entries, sort_keys=True))


def stage_digests(config: PipelineConfig) -> dict[str, str]:
    """Chained digests, one per stage, covering exactly the inputs and
    settings that stage's output depends on. Changing a setting invalidates
    its stage and everything downstream, nothing upstream."""
    templates = config.templates()
    d: dict[str, str] = {}
    d["ingest"] = _digest("ingest", inputs_digest(config.input_paths))
    d["sample"] = _digest(
        "sample", d["ingest"], str(config.seed), str(config.max_groups)
    )
    d["generate"] = _digest(
        "generate", d["sample"],
        config.backend, config.model, repr(config.temperature),
        str(config.max_tokens), str(config.plans_per_group),
        str(config.parse_retries), templates[GENERATION].body,
    )
    d["score"] = _digest(
        "score", d["generate"],
        str(config.scores_per_plan), templates[SCORING].body,
    )
    d["curate"] = _digest("curate", d["score"], repr(config.threshold))
    d["write"] = _digest("write", d["curate"])
    d["stats"] = _digest("stats", d["write"])
    return d


def config_digest(config: PipelineConfig) -> str:
    """Single digest over every semantics-affecting setting."""
    return stage_digests(config)["stats"]
