"""Laplace noise over parameter sets.

The scale ``lam`` is the privacy knob: larger values add more noise.
No (epsilon, delta) accounting is attempted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .params import ParamSet


@dataclass(frozen=True)
class LaplaceSpec:
    mu: float = 0.0
    lam: float = 1e-4

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError(f"Laplace location must be finite, got {self.mu}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"Laplace scale must be positive and finite, got {self.lam}")


def laplace_inverse_cdf(u, mu: float, lam: float) -> np.ndarray:
    """Map ``u`` in the open interval (-0.5, 0.5) to Laplace(mu, lam)."""
    u = np.asarray(u, dtype=np.float64)
    return mu - lam * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample_laplace(rng: np.random.Generator, spec: LaplaceSpec, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. Laplace(spec.mu, spec.lam) values by inverse CDF."""
    if not isinstance(spec, LaplaceSpec):
        raise TypeError("spec must be a LaplaceSpec")
    if spec.lam <= 0:
        raise DomainError(f"Laplace scale must be positive, got {spec.lam}")
    if n < 1:
        raise DomainError(f"need at least one draw, got n={n}")
    u = rng.random(n) - 0.5
    # rng.random() can return exactly 0.0, which would give log(0)
    u[u == -0.5] = np.nextafter(-0.5, 0.0)
    return laplace_inverse_cdf(u, spec.mu, spec.lam)


def perturb(params: ParamSet, spec: LaplaceSpec, rng: np.random.Generator) -> ParamSet:
    """Add an independent Laplace draw to every scalar of ``params``."""
    params.check_finite("parameters to perturb")
    if params.size == 0:
        return ParamSet(params.items())
    noise = sample_laplace(rng, spec, params.size)
    return params.with_vector(params.to_vector() + noise)
