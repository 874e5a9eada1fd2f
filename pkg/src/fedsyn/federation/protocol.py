"""Round orchestration over a simulated star topology.

Each round the server broadcasts the global parameters as wire bytes,
every client trains locally from them, adds Laplace noise and uploads wire
bytes back. The server decodes uploads into :class:`ClientUpdate` values
and aggregates the generator and discriminator separately.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .. import seeding
from ..exceptions import ProtocolError
from ..gan import GanModel, TrainReport, train_local
from ..optim import AdamConfig
from ..privacy import LaplaceSpec, perturb
from .partition import Shard
from .server import AggregationServer, ClientUpdate
from .wire import deserialize_params, serialize_params

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClientSpec:
    client_id: Hashable
    weight: float | None = None  # None: use the shard's weight
    fail_at_round: int | None = None  # fault injection for tests and drills


@dataclass(frozen=True)
class FederationConfig:
    rounds: int = 1
    local_epochs: int = 50
    client_noise: LaplaceSpec | None = LaplaceSpec(0.0, 1e-4)
    server_noise: LaplaceSpec | None = None
    master_seed: int = 0
    clients: tuple[ClientSpec, ...] = ()
    batch_size: int = 256
    opt: AdamConfig = AdamConfig()
    perturb_discriminator: bool = True
    keep_optimizer_state: bool = True
    checkpoint_every: int = 10
    n_jobs: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.local_epochs < 0:
            raise ValueError(f"local_epochs must be >= 0, got {self.local_epochs}")


@dataclass
class RoundRecord:
    round: int
    reports: dict  # client_id -> TrainReport
    weights: dict  # client_id -> normalised weight
    digest: str  # sha256 of the aggregated parameters


@dataclass
class FederationHistory:
    rounds: list[RoundRecord] = field(default_factory=list)


class Client:
    """One participant. Holds its shard; exposes only wire bytes upstream."""

    def __init__(self, index: int, spec: ClientSpec, shard: Shard, config: FederationConfig):
        self.index = index
        self.spec = spec
        self._shard = shard
        self.config = config
        self.weight = spec.weight if spec.weight is not None else shard.weight
        self._optimizer_states = None

    @property
    def client_id(self):
        return self.spec.client_id

    def run_round(self, round_: int, template: GanModel, broadcast: bytes) -> tuple[bytes, TrainReport]:
        cfg = self.config
        if self.spec.fail_at_round is not None and round_ >= self.spec.fail_at_round:
            raise RuntimeError("simulated client failure")
        model = template.load_paramset(deserialize_params(broadcast))
        rng = seeding.stream(cfg.master_seed, seeding.TRAIN, self.index, round_)
        model, report = train_local(
            model, self._shard, epochs=cfg.local_epochs, batch_size=cfg.batch_size,
            opt=cfg.opt, rng=rng, checkpoint_every=cfg.checkpoint_every,
            optimizer_states=self._optimizer_states if cfg.keep_optimizer_state else None,
        )
        self._optimizer_states = report.optimizer_states
        params = model.to_paramset()
        if cfg.client_noise is not None:
            noise_rng = seeding.stream(cfg.master_seed, seeding.CLIENT_NOISE, self.index, round_)
            if cfg.perturb_discriminator:
                params = perturb(params, cfg.client_noise, noise_rng)
            else:
                params = perturb(params.select("g."), cfg.client_noise, noise_rng).prefixed("g.") \
                    .concat(params.select("d.").prefixed("d."))
        return serialize_params(params), report


def run_federation(config: FederationConfig, shards: Sequence[Shard], initial: GanModel):
    """Run ``config.rounds`` rounds of noisy federated averaging.

    Returns ``(global_model, history)``. A failing client aborts the round
    with a :class:`ProtocolError` naming it.
    """
    specs = config.clients or tuple(ClientSpec(i) for i in range(len(shards)))
    if len(specs) != len(shards):
        raise ProtocolError(f"{len(specs)} clients configured but {len(shards)} shards given")
    if not specs:
        raise ProtocolError("a federation needs at least one client")
    clients = [Client(i, spec, shard, config) for i, (spec, shard) in enumerate(zip(specs, shards))]
    server = AggregationServer(config.server_noise)
    history = FederationHistory()

    # the server holds only parameter bytes and the architecture template
    global_bytes = serialize_params(initial.to_paramset())
    template = initial
    for round_ in range(1, config.rounds + 1):
        results = _collect(clients, round_, template, global_bytes, config.n_jobs)
        updates = [ClientUpdate.from_wire(c.client_id, round_, payload, c.weight)
                   for c, (payload, _) in zip(clients, results)]
        rngs = {p: seeding.stream(config.master_seed, seeding.SERVER_NOISE, k, round_)
                for k, p in enumerate(("g.", "d."))}
        new_global = server.aggregate_round(round_, updates, rngs)
        global_bytes = serialize_params(new_global)
        total = sum(c.weight for c in clients)
        history.rounds.append(RoundRecord(
            round=round_,
            reports={c.client_id: rep for c, (_, rep) in zip(clients, results)},
            weights={c.client_id: c.weight / total for c in clients},
            digest=deserialize_params(global_bytes).digest(),
        ))
        log.debug("round %d aggregated, digest %s", round_, history.rounds[-1].digest[:12])

    final = template.load_paramset(deserialize_params(global_bytes))
    return final, history


def _collect(clients, round_, template, broadcast, n_jobs):
    def work(client):
        try:
            return client.run_round(round_, template, broadcast)
        except Exception as exc:
            raise ProtocolError(
                f"client {client.client_id!r} failed in round {round_}: {exc}", client.client_id
            ) from exc

    if n_jobs == 1 or len(clients) == 1:
        return [work(c) for c in clients]
    with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
        return list(pool.map(work, clients))
