"""Desk-scale simulator for federated GAN training with Laplace-noised parameters."""

from .estimators import ClassifierEmbedding, FederatedGANSynthesizer, GANSynthesizer
from .exceptions import (
    AlignmentError,
    CapacityError,
    ConfigError,
    DomainError,
    FedSynError,
    FormatError,
    NumericDomainError,
    PreconditionError,
    ProtocolError,
)
from .params import ParamSet

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "CapacityError",
    "ClassifierEmbedding",
    "ConfigError",
    "DomainError",
    "FedSynError",
    "FederatedGANSynthesizer",
    "FormatError",
    "GANSynthesizer",
    "NumericDomainError",
    "ParamSet",
    "PreconditionError",
    "ProtocolError",
]
