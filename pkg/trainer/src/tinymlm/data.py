"""Document loading, encoding, batching, and masked-LM corruption."""

from __future__ import annotations

from pathlib import Path

import torch

from .errors import EmptyDataset
from .specs import BOS_ID, EOS_ID, MASK_ID, PAD_ID, SPECIAL_TOKENS

DOC_SEPARATOR = "<|doc|>"

MLM_PROBABILITY = 0.15
MASK_FRACTION = 0.8  # of selected positions; 10% random, 10% kept


def load_documents(path: Path | str) -> list[str]:
    """Split the forged dataset file on its separator lines."""
    path = Path(path)
    if not path.is_file():
        raise EmptyDataset(path)
    docs: list[str] = []
    current: list[str] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line == DOC_SEPARATOR:
            docs.append("\n".join(current).strip())
            current = []
        else:
            current.append(line)
    docs.append("\n".join(current).strip())
    docs = [d for d in docs if d]
    if not docs:
        raise EmptyDataset(path)
    return docs


def split_heldout(docs: list[str], fraction: float = 0.1) -> tuple[list[str], list[str]]:
    """Withhold the trailing documents for evaluation, disjoint from training."""
    if len(docs) < 2:
        return list(docs), []
    count = max(1, round(len(docs) * fraction))
    count = min(count, len(docs) - 1)
    return docs[:-count], docs[-count:]


def encode_documents(docs, tokenizer, usable_length: int) -> list[list[int]]:
    """Token ids with boundary tokens, truncated to the usable length.

    Documents longer than the window are truncated, not split.
    """
    sequences = []
    for doc in docs:
        ids = tokenizer.encode(doc).ids[: usable_length - 2]
        sequences.append([BOS_ID] + ids + [EOS_ID])
    return sequences


def collate(sequences: list[list[int]], pad_id: int = PAD_ID):
    """Pad to the batch maximum; returns (input_ids, attention_mask)."""
    width = max(len(s) for s in sequences)
    input_ids = torch.full((len(sequences), width), pad_id, dtype=torch.long)
    attention = torch.zeros((len(sequences), width), dtype=torch.long)
    for row, seq in enumerate(sequences):
        input_ids[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        attention[row, : len(seq)] = 1
    return input_ids, attention


def special_token_mask(input_ids: torch.Tensor) -> torch.Tensor:
    """True where masking must never land.

    The special tokens hold the reserved low ids, and content ids start
    right above them, so a simple threshold identifies bos/eos/pad/unk/mask
    positions.
    """
    return input_ids < len(SPECIAL_TOKENS)


def mask_for_mlm(
    input_ids: torch.Tensor,
    vocab_size: int,
    generator: torch.Generator,
    mlm_probability: float = MLM_PROBABILITY,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Standard masked-LM corruption: select 15% of content positions, of
    which 80% become <mask>, 10% a random token, 10% stay unchanged.
    Labels are -100 everywhere else."""
    labels = input_ids.clone()
    protect = special_token_mask(input_ids)
    probabilities = torch.full(input_ids.shape, mlm_probability)
    probabilities.masked_fill_(protect, 0.0)
    selected = torch.bernoulli(probabilities, generator=generator).bool()
    labels[~selected] = -100

    corrupted = input_ids.clone()
    to_mask = (
        torch.bernoulli(torch.full(input_ids.shape, MASK_FRACTION), generator=generator)
        .bool() & selected
    )
    corrupted[to_mask] = MASK_ID
    to_randomize = (
        torch.bernoulli(torch.full(input_ids.shape, 0.5), generator=generator)
        .bool() & selected & ~to_mask
    )
    random_ids = torch.randint(
        vocab_size, input_ids.shape, dtype=torch.long, generator=generator
    )
    corrupted[to_randomize] = random_ids[to_randomize]
    return corrupted, labels
