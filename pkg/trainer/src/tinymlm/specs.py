"""Tokenizer and model configuration, plus the training report."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

SPECIAL_TOKENS = ("<s>", "<pad>", "</s>", "<unk>", "<mask>")

BOS_ID, PAD_ID, EOS_ID, UNK_ID, MASK_ID = range(5)


@dataclass(frozen=True)
class TokenizerSpec:
    vocab_size: int = 52000
    min_frequency: int = 2
    special_tokens: tuple[str, ...] = SPECIAL_TOKENS

    def __post_init__(self) -> None:
        if self.special_tokens != SPECIAL_TOKENS:
            raise ValueError(f"special tokens must be {SPECIAL_TOKENS}, in that order")
        if self.vocab_size < len(self.special_tokens) + 1:
            raise ValueError("vocab_size leaves no room beyond the special tokens")


@dataclass(frozen=True)
class ModelSpec:
    """Masked-LM transformer shape.

    ``max_positions`` is the size of the position-embedding table; the usable
    sequence length is two less because position ids start after the padding
    id. ``vocab_size=None`` means take the tokenizer's actual size.
    """

    hidden_size: int = 768
    num_layers: int = 12
    num_heads: int = 12
    intermediate_size: int = 3072
    max_positions: int = 512
    dropout: float = 0.1
    vocab_size: int | None = 52000

    def __post_init__(self) -> None:
        if self.hidden_size % self.num_heads:
            raise ValueError(
                f"hidden_size {self.hidden_size} not divisible by "
                f"num_heads {self.num_heads}"
            )
        if self.max_positions < 8:
            raise ValueError("max_positions too small to hold a document")

    @property
    def usable_length(self) -> int:
        return self.max_positions - 2


FULL_PROFILE = ModelSpec()

DESK_PROFILE = ModelSpec(
    hidden_size=128,
    num_layers=2,
    num_heads=4,
    intermediate_size=512,
    max_positions=128,
    vocab_size=None,
)

PROFILES = {"full": FULL_PROFILE, "desk": DESK_PROFILE}


@dataclass
class TrainReport:
    """What a pretraining run did and how it went.

    Optimizer settings are recorded here because they are this trainer's
    choices, with no upstream defaults to defer to.
    """

    epochs: int
    seed: int
    epoch_losses: list[float] = field(default_factory=list)
    heldout_accuracy: float = 0.0
    untrained_accuracy: float = 0.0
    masked_positions: int = 0
    vocab_size: int = 0
    train_documents: int = 0
    heldout_documents: int = 0
    optimizer: dict = field(default_factory=dict)
    determinism_note: str = (
        "single-process CPU training; bit-identical given the same seed, "
        "dataset, and library versions"
    )

    def validate(self) -> None:
        if len(self.epoch_losses) != self.epochs:
            raise ValueError(
                f"report has {len(self.epoch_losses)} epoch losses for "
                f"{self.epochs} epochs"
            )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def save(self, path: Path | str) -> None:
        self.validate()
        Path(path).write_text(self.to_json(), encoding="utf-8")
