"""Masked-LM pretraining loop over a forged dataset."""

from __future__ import annotations

import statistics
from pathlib import Path

import torch
from transformers import RobertaConfig, RobertaForMaskedLM

from .data import collate, encode_documents, load_documents, mask_for_mlm, split_heldout
from .errors import SpecMismatch
from .evaluate import EvalResult, eval_sanity
from .specs import BOS_ID, DESK_PROFILE, EOS_ID, PAD_ID, ModelSpec, TrainReport

# Desk-scale defaults; chosen so five epochs on a fixture-sized corpus leave
# an unmistakable training signal.
DEFAULT_LEARNING_RATE = 2e-3
DEFAULT_WEIGHT_DECAY = 0.01
DEFAULT_BATCH_SIZE = 8


def build_model(spec: ModelSpec, vocab_size: int, seed: int) -> RobertaForMaskedLM:
    if spec.vocab_size is not None and spec.vocab_size != vocab_size:
        raise SpecMismatch(
            f"model spec expects vocab {spec.vocab_size} but the tokenizer "
            f"has {vocab_size}"
        )
    config = RobertaConfig(
        vocab_size=vocab_size,
        hidden_size=spec.hidden_size,
        num_hidden_layers=spec.num_layers,
        num_attention_heads=spec.num_heads,
        intermediate_size=spec.intermediate_size,
        max_position_embeddings=spec.max_positions,
        hidden_dropout_prob=spec.dropout,
        attention_probs_dropout_prob=spec.dropout,
        hidden_act="gelu",
        initializer_range=0.02,
        layer_norm_eps=1e-12,
        type_vocab_size=1,
        position_embedding_type="absolute",
        bos_token_id=BOS_ID,
        pad_token_id=PAD_ID,
        eos_token_id=EOS_ID,
    )
    torch.manual_seed(seed)
    return RobertaForMaskedLM(config)


def pretrain_mlm(
    dataset_path: Path | str,
    tokenizer,
    spec: ModelSpec = DESK_PROFILE,
    epochs: int = 5,
    seed: int = 0,
    *,
    batch_size: int = DEFAULT_BATCH_SIZE,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    weight_decay: float = DEFAULT_WEIGHT_DECAY,
    heldout_fraction: float = 0.1,
) -> tuple[RobertaForMaskedLM, TrainReport]:
    """Train with the standard masked-LM objective and report per-epoch loss.

    Masks are re-drawn every epoch (dynamic masking). With ``epochs=0`` the
    model is returned untouched apart from initialization.
    """
    docs = load_documents(dataset_path)
    train_docs, heldout_docs = split_heldout(docs, heldout_fraction)
    vocab_size = tokenizer.get_vocab_size()
    model = build_model(spec, vocab_size, seed)

    untrained = _maybe_eval(model, tokenizer, heldout_docs, spec, seed)

    sequences = encode_documents(train_docs, tokenizer, spec.usable_length)
    generator = torch.Generator().manual_seed(seed)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=learning_rate, weight_decay=weight_decay
    )

    epoch_losses: list[float] = []
    model.train()
    for _epoch in range(epochs):
        order = torch.randperm(len(sequences), generator=generator).tolist()
        batch_losses: list[float] = []
        for start in range(0, len(order), batch_size):
            batch = [sequences[i] for i in order[start : start + batch_size]]
            input_ids, attention = collate(batch)
            corrupted, labels = mask_for_mlm(input_ids, vocab_size, generator)
            if not (labels != -100).any():
                continue  # nothing selected in a tiny batch; no gradient signal
            output = model(input_ids=corrupted, attention_mask=attention, labels=labels)
            output.loss.backward()
            optimizer.step()
            optimizer.zero_grad()
            batch_losses.append(float(output.loss.detach()))
        epoch_losses.append(statistics.fmean(batch_losses) if batch_losses else 0.0)

    trained = _maybe_eval(model, tokenizer, heldout_docs, spec, seed)

    report = TrainReport(
        epochs=epochs,
        seed=seed,
        epoch_losses=epoch_losses,
        heldout_accuracy=trained.accuracy,
        untrained_accuracy=untrained.accuracy,
        masked_positions=trained.masked_positions,
        vocab_size=vocab_size,
        train_documents=len(train_docs),
        heldout_documents=len(heldout_docs),
        optimizer={
            "name": "AdamW",
            "learning_rate": learning_rate,
            "weight_decay": weight_decay,
            "batch_size": batch_size,
        },
    )
    report.validate()
    return model, report


def _maybe_eval(model, tokenizer, heldout_docs, spec, seed) -> EvalResult:
    if not heldout_docs:
        return EvalResult(accuracy=0.0, masked_positions=0)
    return eval_sanity(model, tokenizer, heldout_docs, spec, seed=seed)
