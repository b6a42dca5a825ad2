"""Command-line entry point."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from .config import PipelineConfig
from .errors import ConfigError, ForgeError
from .pipeline import run

_CONFIG_KEYS = {
    "input_dir", "inputs", "out_dir", "seed", "backend", "base_url", "model",
    "temperature", "max_tokens", "api_key_env", "max_retries", "max_in_flight",
    "request_timeout", "threshold", "plans_per_group", "scores_per_plan",
    "parse_retries", "max_groups", "concurrency", "template_dir",
    "cache_enabled", "resume",
}


def _discover_inputs(input_dir: str) -> list[Path]:
    root = Path(input_dir)
    if not root.is_dir():
        raise ConfigError(f"input directory not found: {input_dir}")
    paths = sorted(root.glob("*.txt"))
    if not paths:
        raise ConfigError(f"no .txt files under {input_dir}")
    return paths


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return raw


def build_config(args: argparse.Namespace) -> PipelineConfig:
    """Merge settings: defaults, then config file, then command-line flags."""
    settings = _load_config_file(args.config)
    flag_values = {
        "input_dir": args.input_dir,
        "out_dir": args.out,
        "seed": args.seed,
        "backend": args.backend,
        "model": args.model,
        "base_url": args.base_url,
        "temperature": args.temperature,
        "max_tokens": args.max_tokens,
        "threshold": args.threshold,
        "plans_per_group": args.plans_per_group,
        "scores_per_plan": args.scores_per_plan,
        "max_groups": args.max_groups,
        "concurrency": args.concurrency,
        "template_dir": args.template_dir,
        "resume": args.resume,
    }
    for key, value in flag_values.items():
        if value is not None:
            settings[key] = value

    input_dir = settings.pop("input_dir", None)
    inputs = settings.pop("inputs", None)
    if input_dir is not None:
        input_paths = _discover_inputs(str(input_dir))
    elif inputs:
        input_paths = [Path(p) for p in inputs]
    else:
        raise ConfigError("either --input-dir or an 'inputs' list is required")

    config = PipelineConfig(input_paths=input_paths)
    for key, value in settings.items():
        if key in ("out_dir", "template_dir") and value is not None:
            value = Path(value)
        setattr(config, key, value)
    config.validate()
    return config


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nluforge",
        description="Restructure a raw sentence corpus into a pretraining "
        "dataset of generated NLU task examples.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute the full pipeline")
    runp.add_argument("--config", help="YAML config file")
    runp.add_argument("--input-dir", help="directory of .txt corpus files")
    runp.add_argument("--out", help="output directory (default: out)")
    runp.add_argument("--seed", type=int, help="sampling seed (default: 42)")
    runp.add_argument("--backend", choices=["remote", "mock"],
                      help="completion backend (default: mock)")
    runp.add_argument("--model", help="model name (default: gpt-3.5-turbo)")
    runp.add_argument("--base-url", help="OpenAI-compatible API base URL")
    runp.add_argument("--temperature", type=float, help="sampling temperature")
    runp.add_argument("--max-tokens", type=int, help="completion token limit")
    runp.add_argument("--threshold", type=float,
                      help="minimum mean coherence score (default: 7.0)")
    runp.add_argument("--plans-per-group", type=int,
                      help="generation candidates per group (default: 2)")
    runp.add_argument("--scores-per-plan", type=int,
                      help="coherence samples per candidate (default: 5)")
    runp.add_argument("--max-groups", type=int, help="cap on sampled groups")
    runp.add_argument("--concurrency", type=int, help="worker pool size")
    runp.add_argument("--template-dir", help="prompt template override directory")
    runp.add_argument("--resume", dest="resume", action="store_true", default=None,
                      help="reuse matching checkpoints (default)")
    runp.add_argument("--no-resume", dest="resume", action="store_false",
                      help="discard checkpoints and recompute all stages")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        config = build_config(args)
    except ForgeError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    try:
        result = run(config)
    except ForgeError as exc:
        print(f"error [pipeline]: {exc}", file=sys.stderr)
        return 1
    print(result.summary)
    print(f"dataset: {result.dataset_path}")
    print(f"manifest: {result.manifest_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
