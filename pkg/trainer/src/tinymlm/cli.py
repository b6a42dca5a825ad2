"""Command-line entry point: train-tokenizer and pretrain subcommands."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .errors import TrainerError
from .pretrain import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_LEARNING_RATE,
    pretrain_mlm,
)
from .specs import PROFILES, TokenizerSpec
from .tokenizer import load_tokenizer, save_tokenizer, train_tokenizer


def _check_manifest(manifest_path: str | None, dataset_path: str) -> dict:
    """Cross-check the dataset file against the forge manifest, if given."""
    if manifest_path is None:
        return {}
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    actual = hashlib.sha256(Path(dataset_path).read_bytes()).hexdigest()
    expected = manifest.get("dataset_digest", "")
    if expected and expected != actual:
        raise TrainerError(
            f"dataset digest {actual} does not match the manifest's {expected}"
        )
    return {
        "dataset_digest": actual,
        "forge_total_instances": manifest.get("total_instances"),
    }


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tinymlm",
        description="Train a byte-level BPE tokenizer and pretrain a toy "
        "masked LM on a forged NLU-example dataset.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    tok = sub.add_parser("train-tokenizer", help="train the BPE tokenizer")
    tok.add_argument("--dataset", required=True, help="forged dataset text file")
    tok.add_argument("--out", default="models/tokenizer", help="artifact directory")
    tok.add_argument("--vocab-size", type=int, default=52000)
    tok.add_argument("--min-frequency", type=int, default=2)

    pre = sub.add_parser("pretrain", help="pretrain the masked LM")
    pre.add_argument("--dataset", required=True, help="forged dataset text file")
    pre.add_argument("--manifest", help="forge manifest.json for integrity checks")
    pre.add_argument("--tokenizer", required=True, help="tokenizer artifact directory")
    pre.add_argument("--out", default="models/mlm", help="model output directory")
    pre.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    pre.add_argument("--epochs", type=int, default=5)
    pre.add_argument("--seed", type=int, default=0)
    pre.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)
    pre.add_argument("--learning-rate", type=float, default=DEFAULT_LEARNING_RATE)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "train-tokenizer":
            spec = TokenizerSpec(
                vocab_size=args.vocab_size, min_frequency=args.min_frequency
            )
            tokenizer, stats = train_tokenizer(args.dataset, spec)
            out = Path(args.out)
            save_tokenizer(tokenizer, out)
            (out / "stats.json").write_text(
                json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            print(f"tokenizer: {stats['vocab_size']} entries -> {out}")
            return 0

        provenance = _check_manifest(args.manifest, args.dataset)
        tokenizer = load_tokenizer(args.tokenizer)
        model, report = pretrain_mlm(
            args.dataset,
            tokenizer,
            spec=PROFILES[args.profile],
            epochs=args.epochs,
            seed=args.seed,
            batch_size=args.batch_size,
            learning_rate=args.learning_rate,
        )
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        model.save_pretrained(out)
        report_payload = json.loads(report.to_json())
        report_payload.update(provenance)
        (out / "report.json").write_text(
            json.dumps(report_payload, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        losses = ", ".join(f"{loss:.3f}" for loss in report.epoch_losses)
        print(f"epoch losses: [{losses}]")
        print(
            f"held-out accuracy: {report.heldout_accuracy:.4f} "
            f"(untrained {report.untrained_accuracy:.4f}, "
            f"{report.masked_positions} masked positions)"
        )
        print(f"model + report -> {out}")
        return 0
    except TrainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
