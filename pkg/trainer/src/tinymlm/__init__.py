"""tinymlm: byte-level BPE tokenizer training and toy masked-LM pretraining
on forged NLU-example datasets."""

from .data import load_documents, mask_for_mlm, split_heldout
from .evaluate import EvalResult, eval_sanity
from .pretrain import build_model, pretrain_mlm
from .specs import (
    DESK_PROFILE,
    FULL_PROFILE,
    PROFILES,
    SPECIAL_TOKENS,
    ModelSpec,
    TokenizerSpec,
    TrainReport,
)
from .tokenizer import load_tokenizer, save_tokenizer, train_tokenizer

__version__ = "0.1.0"

__all__ = [
    "DESK_PROFILE",
    "EvalResult",
    "FULL_PROFILE",
    "ModelSpec",
    "PROFILES",
    "SPECIAL_TOKENS",
    "TokenizerSpec",
    "TrainReport",
    "build_model",
    "eval_sanity",
    "load_documents",
    "load_tokenizer",
    "mask_for_mlm",
    "pretrain_mlm",
    "save_tokenizer",
    "split_heldout",
    "train_tokenizer",
]
