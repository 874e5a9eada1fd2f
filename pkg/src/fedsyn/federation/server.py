"""Aggregation server: noisy weighted averaging of client uploads.

This module only ever sees :class:`ClientUpdate` values. It imports
nothing that can reach raw training data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from ..exceptions import ProtocolError
from ..params import ParamSet
from ..privacy import LaplaceSpec, perturb
from .wire import deserialize_params


@dataclass(frozen=True)
class ClientUpdate:
    """Parameters uploaded by one client for one round (noise already added)."""

    client_id: Hashable
    round: int
    params: ParamSet
    weight: float

    def __post_init__(self):
        if not isinstance(self.params, ParamSet):
            raise TypeError("ClientUpdate.params must be a ParamSet")
        if self.round < 1:
            raise ProtocolError(f"round must be >= 1, got {self.round}", self.client_id)
        if not self.weight > 0:
            raise ProtocolError(f"client weight must be positive, got {self.weight}", self.client_id)
        self.params.check_finite(f"upload from client {self.client_id!r}")

    @classmethod
    def from_wire(cls, client_id, round_: int, payload: bytes, weight: float) -> "ClientUpdate":
        return cls(client_id, round_, deserialize_params(payload), weight)


def aggregate(updates: Sequence[ClientUpdate], server_noise: LaplaceSpec | None,
              rng: np.random.Generator | None = None) -> ParamSet:
    """Weighted mean of the uploads plus one Laplace draw per scalar.

    Weights are normalised by their sum, so scaling all of them by a common
    factor changes nothing. ``server_noise=None`` skips the noise term.
    """
    updates = list(updates)
    if not updates:
        raise ProtocolError("cannot aggregate an empty list of updates")
    for u in updates:
        if not isinstance(u, ClientUpdate):
            raise TypeError(f"aggregate accepts ClientUpdate values only, got {type(u).__name__}")
    first = updates[0].params
    for u in updates[1:]:
        first.check_aligned(u.params, f"uploads from {updates[0].client_id!r} and {u.client_id!r}")

    weights = np.array([u.weight for u in updates], dtype=np.float64)
    weights = weights / weights.sum()
    stacked = np.stack([u.params.to_vector() for u in updates])
    mean = first.with_vector(weights @ stacked)
    if server_noise is None:
        return mean
    if rng is None:
        raise ValueError("server noise needs an rng")
    return perturb(mean, server_noise, rng)


class AggregationServer:
    """Collects one round of uploads and publishes the new global parameters."""

    def __init__(self, server_noise: LaplaceSpec | None = None):
        self.server_noise = server_noise
        self.log: list[dict] = []

    def aggregate_round(self, round_: int, updates: Sequence[ClientUpdate],
                        rngs: dict[str, np.random.Generator]) -> ParamSet:
        """Aggregate ``g.`` and ``d.`` entries independently.

        ``rngs`` maps each prefix to the noise stream used for it.
        """
        out = None
        for prefix in ("g.", "d."):
            part = [ClientUpdate(u.client_id, u.round, u.params.select(prefix), u.weight)
                    for u in updates]
            agg = aggregate(part, self.server_noise, rngs.get(prefix)).prefixed(prefix)
            out = agg if out is None else out.concat(agg)
        total = sum(u.weight for u in updates)
        for u in updates:
            self.log.append({"round": round_, "client": u.client_id,
                             "weight": u.weight / total})
        return out
