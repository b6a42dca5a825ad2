"""Held-out sanity evaluation: masked-token top-1 accuracy."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .data import MLM_PROBABILITY, collate, encode_documents, special_token_mask
from .errors import EmptyHeldout
from .specs import MASK_ID, ModelSpec


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    masked_positions: int


@torch.no_grad()
def eval_sanity(
    model,
    tokenizer,
    heldout_docs: list[str],
    spec: ModelSpec,
    seed: int = 0,
    batch_size: int = 8,
) -> EvalResult:
    """Mask a seeded 15% of content positions across the held-out documents
    and measure top-1 recovery accuracy. Evaluation masking is pure <mask>
    replacement so the measured signal is exactly mask filling."""
    if not heldout_docs:
        raise EmptyHeldout("held-out slice is empty")
    sequences = encode_documents(heldout_docs, tokenizer, spec.usable_length)
    generator = torch.Generator().manual_seed(seed)
    was_training = model.training
    model.eval()
    correct = 0
    total = 0
    for start in range(0, len(sequences), batch_size):
        input_ids, attention = collate(sequences[start : start + batch_size])
        protect = special_token_mask(input_ids)
        probabilities = torch.full(input_ids.shape, MLM_PROBABILITY)
        probabilities.masked_fill_(protect, 0.0)
        selected = torch.bernoulli(probabilities, generator=generator).bool()
        if not selected.any():
            continue
        masked = input_ids.clone()
        masked[selected] = MASK_ID
        logits = model(input_ids=masked, attention_mask=attention).logits
        predictions = logits.argmax(dim=-1)
        correct += int((predictions[selected] == input_ids[selected]).sum())
        total += int(selected.sum())
    if was_training:
        model.train()
    if total == 0:
        raise EmptyHeldout("held-out slice has no maskable positions")
    return EvalResult(accuracy=correct / total, masked_positions=total)
