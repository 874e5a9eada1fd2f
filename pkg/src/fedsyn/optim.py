"""Adam with bias correction, as a pure function over ParamSets."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import NumericDomainError
from .params import ParamSet


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class AdamState:
    m: ParamSet
    v: ParamSet
    t: int = 0
    config: AdamConfig = AdamConfig()

    @classmethod
    def for_params(cls, params: ParamSet, config: AdamConfig | None = None) -> "AdamState":
        zeros = params.zeros_like()
        return cls(zeros, zeros, 0, config or AdamConfig())


def adam_step(params: ParamSet, grads: ParamSet, state: AdamState):
    """One Adam update. Returns ``(new_params, new_state)``."""
    params.check_aligned(grads, "params and grads")
    params.check_aligned(state.m, "params and Adam moments")
    params.check_aligned(state.v, "params and Adam moments")
    grads.check_finite("gradient")

    cfg = state.config
    t = state.t + 1
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    new_p, new_m, new_v = [], [], []
    for name, p in params.items():
        g = grads[name]
        m = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * (g * g)
        step = cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        new_p.append((name, p - step))
        new_m.append((name, m))
        new_v.append((name, v))
    out = ParamSet(new_p)
    if not out.is_finite():
        raise NumericDomainError("Adam produced non-finite parameters")
    return out, replace(state, m=ParamSet(new_m), v=ParamSet(new_v), t=t)


__all__ = ["AdamConfig", "AdamState", "adam_step"]
