"""Label-based non-IID partitioning into client shards."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..exceptions import AlignmentError, CapacityError, DomainError


@dataclass(frozen=True)
class Shard:
    """Training rows held by one client, plus its importance weight."""

    samples: np.ndarray
    labels: np.ndarray
    weight: float

    def __post_init__(self):
        if self.samples.shape[0] != self.labels.shape[0]:
            raise AlignmentError("shard samples and labels differ in row count")
        if not self.weight > 0:
            raise DomainError(f"shard weight must be positive, got {self.weight}")

    def __len__(self) -> int:
        return self.samples.shape[0]


def partition_non_iid(samples, labels, groups: Sequence[Sequence[int]], sizes: Sequence[int],
                      rng: np.random.Generator) -> list[Shard]:
    """Split a labelled dataset into one shard per label group.

    Shard ``i`` holds exactly ``sizes[i]`` rows drawn without replacement
    from rows whose label is in ``groups[i]``. Weights are the sizes
    normalised to sum to one.
    """
    x = np.asarray(samples)
    y = np.asarray(labels)
    if x.shape[0] != y.shape[0]:
        raise AlignmentError("samples and labels differ in row count")
    if len(groups) != len(sizes):
        raise AlignmentError(f"{len(groups)} label groups but {len(sizes)} sizes")
    if not groups:
        raise DomainError("need at least one label group")
    seen: set[int] = set()
    for g in groups:
        overlap = seen.intersection(g)
        if overlap:
            raise DomainError(f"label groups overlap on {sorted(overlap)}")
        seen.update(int(l) for l in g)
    if any(s < 1 for s in sizes):
        raise DomainError(f"shard sizes must be positive, got {list(sizes)}")

    total = float(sum(sizes))
    shards = []
    for g, size in zip(groups, sizes):
        pool = np.flatnonzero(np.isin(y, list(g)))
        if pool.size < size:
            raise CapacityError(
                f"label group {sorted(int(l) for l in g)} has {pool.size} samples, {size} requested")
        pick = np.sort(rng.choice(pool, size=size, replace=False))
        shards.append(Shard(x[pick], y[pick], size / total))
    return shards
