"""Federated averaging of GANs with Laplace noise over a star topology."""

from .partition import Shard, partition_non_iid
from .protocol import (
    Client,
    ClientSpec,
    FederationConfig,
    FederationHistory,
    RoundRecord,
    run_federation,
)
from .server import AggregationServer, ClientUpdate, aggregate
from .wire import deserialize_params, load_checkpoint, save_checkpoint, serialize_params

__all__ = [
    "AggregationServer",
    "Client",
    "ClientSpec",
    "ClientUpdate",
    "FederationConfig",
    "FederationHistory",
    "RoundRecord",
    "Shard",
    "aggregate",
    "deserialize_params",
    "load_checkpoint",
    "partition_non_iid",
    "run_federation",
    "save_checkpoint",
    "serialize_params",
]
