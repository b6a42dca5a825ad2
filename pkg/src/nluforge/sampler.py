"""Deterministic partition of the sentence store into 5-sentence groups."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .corpus import SentenceStore
from .errors import CorpusTooSmall

GROUP_SIZE = 5


@dataclass(frozen=True)
class SampleGroup:
    """One bundle of exactly five distinct sentence ids."""

    group_id: int
    sentence_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.sentence_ids) != GROUP_SIZE:
            raise ValueError(f"group needs {GROUP_SIZE} ids, got {len(self.sentence_ids)}")
        if len(set(self.sentence_ids)) != GROUP_SIZE:
            raise ValueError("sentence ids within a group must be distinct")


def _randbelow(rng: random.Random, n: int) -> int:
    """Uniform draw in [0, n) via rejection sampling on getrandbits.

    Pinned here (rather than relying on random.Random internals) so the
    permutation is a documented, platform-independent function of the seed:
    Mersenne Twister output consumed k = bit_length(n) bits at a time,
    rejecting draws >= n.
    """
    k = n.bit_length()
    r = rng.getrandbits(k)
    while r >= n:
        r = rng.getrandbits(k)
    return r


def seeded_permutation(n: int, seed: int) -> list[int]:
    """Fisher-Yates shuffle of range(n) driven by a Mersenne Twister seeded
    with ``seed``. Identical output for identical (n, seed) on any platform."""
    rng = random.Random(seed)
    ids = list(range(n))
    for i in range(n - 1, 0, -1):
        j = _randbelow(rng, i + 1)
        ids[i], ids[j] = ids[j], ids[i]
    return ids


def sample_groups(
    store: SentenceStore,
    seed: int,
    max_groups: int | None = None,
) -> list[SampleGroup]:
    """Shuffle sentence ids and consume them in disjoint chunks of five.

    A trailing chunk of fewer than five ids is discarded; with ``max_groups``
    only the first that many groups are returned.
    """
    n = len(store)
    if n < GROUP_SIZE:
        raise CorpusTooSmall(have=n, need=GROUP_SIZE)
    order = seeded_permutation(n, seed)
    total = n // GROUP_SIZE
    if max_groups is not None:
        total = min(total, max_groups)
    return [
        SampleGroup(
            group_id=g,
            sentence_ids=tuple(order[g * GROUP_SIZE : (g + 1) * GROUP_SIZE]),
        )
        for g in range(total)
    ]
