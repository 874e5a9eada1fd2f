"""Small dense GANs and the local adversarial training loop."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import AlignmentError, DomainError, NumericDomainError
from .nn import Arch, Dense, Dropout, LeakyRelu, Sigmoid, backward, bce_loss, forward, init_params
from .optim import AdamConfig, AdamState, adam_step
from .params import ParamSet

CHECKPOINT_EVERY = 10


@dataclass(frozen=True)
class GanModel:
    gen_arch: Arch
    gen_params: ParamSet
    disc_arch: Arch
    disc_params: ParamSet
    latent_dim: int

    def __post_init__(self):
        self.gen_arch.check_params(self.gen_params)
        self.disc_arch.check_params(self.disc_params)
        if self.gen_arch.in_dim != self.latent_dim:
            raise AlignmentError(
                f"generator input {self.gen_arch.in_dim} != latent_dim {self.latent_dim}")
        if self.gen_arch.out_dim != self.disc_arch.in_dim:
            raise AlignmentError(
                f"generator output {self.gen_arch.out_dim} != discriminator input {self.disc_arch.in_dim}")

    @property
    def data_dim(self) -> int:
        return self.gen_arch.out_dim

    def with_params(self, gen_params: ParamSet, disc_params: ParamSet) -> "GanModel":
        return replace(self, gen_params=gen_params, disc_params=disc_params)

    def to_paramset(self) -> ParamSet:
        """Generator and discriminator in one set, prefixed ``g.`` and ``d.``."""
        return self.gen_params.prefixed("g.").concat(self.disc_params.prefixed("d."))

    def load_paramset(self, params: ParamSet) -> "GanModel":
        return self.with_params(params.select("g."), params.select("d."))


def generator_arch(latent_dim: int, hidden: int, data_dim: int, slope: float = 0.2,
                   sigmoid_head: bool = False) -> Arch:
    layers = [Dense(latent_dim, hidden), LeakyRelu(slope), Dense(hidden, data_dim)]
    if sigmoid_head:
        layers.append(Sigmoid())
    return Arch(layers)


def discriminator_arch(data_dim: int, hidden: int, slope: float = 0.2, dropout: float = 0.3) -> Arch:
    return Arch([Dense(data_dim, hidden), LeakyRelu(slope), Dropout(dropout), Dense(hidden, 1), Sigmoid()])


def build_gan(data_dim: int, rng: np.random.Generator, latent_dim: int = 8, hidden: int = 32,
              slope: float = 0.2, dropout: float = 0.3, sigmoid_head: bool = False,
              init_std: float = 0.02) -> GanModel:
    g_arch = generator_arch(latent_dim, hidden, data_dim, slope, sigmoid_head)
    d_arch = discriminator_arch(data_dim, hidden, slope, dropout)
    return GanModel(g_arch, init_params(g_arch, rng, init_std), d_arch,
                    init_params(d_arch, rng, init_std), latent_dim)


def model_from_paramset(params: ParamSet, slope: float = 0.2, dropout: float = 0.3,
                        sigmoid_head: bool = False) -> GanModel:
    """Rebuild the standard two-layer GAN from a ``g.``/``d.`` parameter set."""
    g, d = params.select("g."), params.select("d.")
    try:
        latent_dim, hidden_g = g["w0"].shape
        data_dim = g["w1"].shape[1]
        hidden_d = d["w0"].shape[1]
    except KeyError as exc:
        raise AlignmentError(f"checkpoint lacks entry {exc}") from None
    g_arch = generator_arch(latent_dim, hidden_g, data_dim, slope, sigmoid_head)
    d_arch = discriminator_arch(data_dim, hidden_d, slope, dropout)
    return GanModel(g_arch, g, d_arch, d, latent_dim)


@dataclass(frozen=True)
class Checkpoint:
    epoch: int
    real_acc: float
    fake_acc: float
    disc_loss: float
    gen_loss: float


@dataclass
class TrainReport:
    checkpoints: list[Checkpoint] = field(default_factory=list)
    # final (generator, discriminator) Adam states; lets a client resume
    optimizer_states: tuple[AdamState, AdamState] | None = field(default=None, repr=False)


def sample_latent(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    if n < 1 or dim < 1:
        raise DomainError(f"latent batch needs n, dim >= 1, got ({n}, {dim})")
    return rng.standard_normal((n, dim))


def generate(model: GanModel, latents) -> np.ndarray:
    z = np.asarray(latents, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != model.latent_dim:
        raise AlignmentError(f"latents must have {model.latent_dim} columns, got shape {z.shape}")
    out, _ = forward(model.gen_arch, model.gen_params, z, mode="eval")
    return out


def discriminator_accuracy(model: GanModel, real_batch, rng: np.random.Generator):
    """Fraction of real rows scored > 0.5 and of generated rows scored <= 0.5.

    Draws exactly ``len(real_batch)`` generated rows.
    """
    real = np.asarray(real_batch, dtype=np.float64)
    if real.shape[0] == 0:
        raise DomainError("real_batch must be non-empty")
    fake = generate(model, sample_latent(rng, real.shape[0], model.latent_dim))
    p_real, _ = forward(model.disc_arch, model.disc_params, real, mode="eval")
    p_fake, _ = forward(model.disc_arch, model.disc_params, fake, mode="eval")
    return float(np.mean(p_real > 0.5)), float(np.mean(p_fake <= 0.5))


def _as_samples(shard) -> np.ndarray:
    samples = getattr(shard, "samples", shard)
    return np.asarray(samples, dtype=np.float64)


def train_local(model: GanModel, shard, epochs: int = 50, batch_size: int = 256,
                opt: AdamConfig | None = None, rng: np.random.Generator | None = None,
                checkpoint_every: int = CHECKPOINT_EVERY, train_discriminator: bool = True,
                train_generator: bool = True,
                optimizer_states: tuple[AdamState, AdamState] | None = None):
    """Adversarial training on one participant's samples.

    Each batch takes one discriminator step (real rows labelled 1, generated
    rows labelled 0) and then one generator step against the frozen
    discriminator with target label 1. A :class:`Checkpoint` is recorded every
    ``checkpoint_every`` epochs. Passing ``optimizer_states`` (as found on a
    previous report) continues Adam from those moments instead of zero.

    Returns ``(trained_model, report)``.
    """
    report = TrainReport(optimizer_states=optimizer_states)
    if epochs == 0:
        return model, report
    if epochs < 0:
        raise DomainError(f"epochs must be >= 0, got {epochs}")
    if rng is None:
        raise ValueError("train_local needs an rng")
    data = _as_samples(shard)
    n = data.shape[0]
    if n == 0:
        raise DomainError("cannot train on an empty shard")
    if data.ndim != 2 or data.shape[1] != model.data_dim:
        raise AlignmentError(f"shard rows must have {model.data_dim} features, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise NumericDomainError("shard holds non-finite samples")
    bs = max(1, min(batch_size, n))
    opt = opt or AdamConfig()

    g_arch, d_arch = model.gen_arch, model.disc_arch
    g_params, d_params = model.gen_params, model.disc_params
    if optimizer_states is None:
        g_state = AdamState.for_params(g_params, opt)
        d_state = AdamState.for_params(d_params, opt)
    else:
        g_state, d_state = (replace(st, config=opt) for st in optimizer_states)

    d_losses, g_losses = [], []
    order = np.arange(n)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            real = data[order[start:start + bs]]
            m = real.shape[0]

            if train_discriminator:
                z = sample_latent(rng, m, model.latent_dim)
                fake, _ = forward(g_arch, g_params, z, mode="eval")
                p_real, tape_r = forward(d_arch, d_params, real, mode="train", rng=rng)
                p_fake, tape_f = forward(d_arch, d_params, fake, mode="train", rng=rng)
                loss_r, grad_r = bce_loss(p_real, np.ones_like(p_real))
                loss_f, grad_f = bce_loss(p_fake, np.zeros_like(p_fake))
                d_grads = backward(d_arch, tape_r, grad_r) + backward(d_arch, tape_f, grad_f)
                d_params, d_state = adam_step(d_params, d_grads, d_state)
                d_losses.append(loss_r + loss_f)

            if train_generator:
                z = sample_latent(rng, m, model.latent_dim)
                fake, tape_g = forward(g_arch, g_params, z, mode="train", rng=rng)
                p_fake, tape_d = forward(d_arch, d_params, fake, mode="train", rng=rng)
                loss_g, grad_p = bce_loss(p_fake, np.ones_like(p_fake))
                _, grad_x = backward(d_arch, tape_d, grad_p, return_input_grad=True)
                g_grads = backward(g_arch, tape_g, grad_x)
                g_params, g_state = adam_step(g_params, g_grads, g_state)
                g_losses.append(loss_g)

        if checkpoint_every and epoch % checkpoint_every == 0:
            current = model.with_params(g_params, d_params)
            current.gen_params.check_finite("generator parameters")
            current.disc_params.check_finite("discriminator parameters")
            real_acc, fake_acc = discriminator_accuracy(current, data[order[:bs]], rng)
            report.checkpoints.append(Checkpoint(
                epoch, real_acc, fake_acc,
                float(np.mean(d_losses)) if d_losses else float("nan"),
                float(np.mean(g_losses)) if g_losses else float("nan"),
            ))
            d_losses, g_losses = [], []

    report.optimizer_states = (g_state, d_state)
    return model.with_params(g_params, d_params), report
