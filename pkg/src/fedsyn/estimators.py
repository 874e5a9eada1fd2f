"""scikit-learn style front ends.

``GANSynthesizer`` trains one GAN on all rows it is given;
``FederatedGANSynthesizer`` splits the rows by label into client shards and
runs noisy federated averaging; ``ClassifierEmbedding`` is a small
classifier whose hidden layer serves as a feature space for Fréchet scoring
of image data. All three support ``get_params``/``set_params`` and
``clone`` through :class:`sklearn.base.BaseEstimator`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import seeding
from .federation import ClientSpec, FederationConfig, partition_non_iid, run_federation
from .gan import build_gan, generate, sample_latent, train_local
from .metrics import frechet_report
from .nn import Arch, Dense, LeakyRelu, Sigmoid, backward, bce_loss, forward, init_params
from .optim import AdamConfig, AdamState, adam_step
from .params import ParamSet
from .privacy import LaplaceSpec

THREE_WAY_GROUPS = ((0, 1, 2), (3, 4, 5, 6), (7, 8, 9))


def quantize(params: ParamSet) -> ParamSet:
    """Round every value to float32, the precision of the wire format."""
    return params.map(lambda a: a.astype(np.float32).astype(np.float64))


class _SamplerMixin:
    def sample(self, n_samples=1, random_state=None):
        """Draw ``n_samples`` synthetic rows from the fitted generator."""
        check_is_fitted(self, "model_")
        if n_samples == 0:
            return np.zeros((0, self.n_features_in_))
        rng = seeding.as_generator(random_state)
        return generate(self.model_, sample_latent(rng, n_samples, self.model_.latent_dim))

    def score(self, X, y=None):
        """Negative Fréchet distance between ``X`` and as many synthetic rows."""
        X = check_array(X, ensure_min_samples=2)
        fake = self.sample(X.shape[0], random_state=seeding.stream(self._seed(), seeding.EVAL))
        return -frechet_report(X, fake).score

    def _seed(self):
        return 0 if self.random_state is None else int(self.random_state)

    def _initial_model(self, n_features):
        model = build_gan(
            n_features, seeding.stream(self._seed(), seeding.INIT),
            latent_dim=self.latent_dim, hidden=self.hidden_dim, slope=self.leaky_slope,
            dropout=self.dropout, sigmoid_head=self.output_activation == "sigmoid",
        )
        return model.load_paramset(quantize(model.to_paramset()))


class GANSynthesizer(_SamplerMixin, BaseEstimator):
    """A GAN trained centrally on the full dataset.

    Parameters
    ----------
    latent_dim : int, default=8
    hidden_dim : int, default=128
        Width of the single hidden layer in both networks.
    epochs : int, default=50
    batch_size : int, default=64
    learning_rate, beta1, beta2 : float
        Adam hyperparameters for both networks.
    leaky_slope : float, default=0.2
    dropout : float, default=0.3
        Dropout rate in the discriminator.
    output_activation : {"linear", "sigmoid"}, default="linear"
        Use "sigmoid" for data scaled into [0, 1].
    random_state : int or None
        Master seed; the same seed reproduces the fit bit for bit.

    Attributes
    ----------
    model_ : GanModel
    report_ : TrainReport
    n_features_in_ : int
    """

    def __init__(self, latent_dim=8, hidden_dim=128, epochs=50, batch_size=64,
                 learning_rate=1e-3, beta1=0.5, beta2=0.999, leaky_slope=0.2, dropout=0.3,
                 output_activation="linear", checkpoint_every=10, random_state=None):
        self.latent_dim = latent_dim
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.leaky_slope = leaky_slope
        self.dropout = dropout
        self.output_activation = output_activation
        self.checkpoint_every = checkpoint_every
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        init = self._initial_model(X.shape[1])
        # same stream a lone federated client would get in round 1
        rng = seeding.stream(self._seed(), seeding.TRAIN, 0, 1)
        self.model_, self.report_ = train_local(
            init, X, epochs=self.epochs, batch_size=self.batch_size,
            opt=AdamConfig(self.learning_rate, self.beta1, self.beta2), rng=rng,
            checkpoint_every=self.checkpoint_every,
        )
        return self


class FederatedGANSynthesizer(_SamplerMixin, BaseEstimator):
    """A GAN built by noisy federated averaging over label-partitioned clients.

    ``fit(X, y)`` gives client ``k`` the rows whose label is in
    ``label_groups[k]`` (``shard_sizes[k]`` of them, or all when
    ``shard_sizes`` is None). Clients train locally, add Laplace noise with
    scale ``client_lambda`` to their parameters and the server averages the
    uploads, adding its own noise when ``server_lambda`` is set.

    ``client_failures`` maps a client id to the round at which that client
    should fail; it exists for fault-injection drills.

    Attributes
    ----------
    model_ : GanModel
    history_ : FederationHistory
    weights_ : ndarray of shape (n_clients,)
    """

    def __init__(self, label_groups=THREE_WAY_GROUPS, shard_sizes=None, rounds=300, local_epochs=5,
                 client_lambda=1e-4, server_lambda=None, perturb_discriminator=True,
                 latent_dim=8, hidden_dim=128, batch_size=256, learning_rate=3e-4, beta1=0.5,
                 beta2=0.999, leaky_slope=0.2, dropout=0.3, output_activation="linear",
                 keep_optimizer_state=True, checkpoint_every=10, client_ids=None,
                 client_failures=None, n_jobs=1, random_state=None):
        self.label_groups = label_groups
        self.shard_sizes = shard_sizes
        self.rounds = rounds
        self.local_epochs = local_epochs
        self.client_lambda = client_lambda
        self.server_lambda = server_lambda
        self.perturb_discriminator = perturb_discriminator
        self.latent_dim = latent_dim
        self.hidden_dim = hidden_dim
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.leaky_slope = leaky_slope
        self.dropout = dropout
        self.output_activation = output_activation
        self.keep_optimizer_state = keep_optimizer_state
        self.checkpoint_every = checkpoint_every
        self.client_ids = client_ids
        self.client_failures = client_failures
        self.n_jobs = n_jobs
        self.random_state = random_state

    def federation_config(self, clients=()):
        return FederationConfig(
            rounds=self.rounds,
            local_epochs=self.local_epochs,
            client_noise=None if self.client_lambda is None else LaplaceSpec(0.0, self.client_lambda),
            server_noise=None if self.server_lambda is None else LaplaceSpec(0.0, self.server_lambda),
            master_seed=self._seed(),
            clients=tuple(clients),
            batch_size=self.batch_size,
            opt=AdamConfig(self.learning_rate, self.beta1, self.beta2),
            perturb_discriminator=self.perturb_discriminator,
            keep_optimizer_state=self.keep_optimizer_state,
            checkpoint_every=self.checkpoint_every,
            n_jobs=self.n_jobs,
        )

    def make_shards(self, X, y):
        groups = [tuple(g) for g in self.label_groups]
        sizes = self.shard_sizes
        if sizes is None:
            sizes = [int(np.isin(y, g).sum()) for g in groups]
        return partition_non_iid(X, y, groups, sizes, seeding.stream(self._seed(), seeding.PARTITION))

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.n_features_in_ = X.shape[1]
        shards = self.make_shards(X, y)
        ids = self.client_ids or [f"client{k}" for k in range(len(shards))]
        failures = self.client_failures or {}
        clients = [ClientSpec(cid, fail_at_round=failures.get(cid)) for cid in ids]
        self.model_, self.history_ = run_federation(
            self.federation_config(clients), shards, self._initial_model(X.shape[1]))
        self.weights_ = np.array([s.weight for s in shards])
        return self


class ClassifierEmbedding(TransformerMixin, BaseEstimator):
    """One-hidden-layer classifier; ``transform`` returns hidden activations.

    Trained with one-vs-rest sigmoid outputs and binary cross-entropy.
    """

    def __init__(self, hidden_dim=64, epochs=5, batch_size=128, learning_rate=1e-3,
                 leaky_slope=0.2, random_state=None):
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.leaky_slope = leaky_slope
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, codes = np.unique(y, return_inverse=True)
        targets = np.eye(len(self.classes_))[codes]
        self.arch_ = Arch([Dense(X.shape[1], self.hidden_dim), LeakyRelu(self.leaky_slope),
                           Dense(self.hidden_dim, len(self.classes_)), Sigmoid()])
        seed = 0 if self.random_state is None else int(self.random_state)
        rng = seeding.stream(seed, seeding.EVAL, 1)
        params = init_params(self.arch_, rng, std=0.05)
        state = AdamState.for_params(params, AdamConfig(lr=self.learning_rate, beta1=0.9))
        bs = min(self.batch_size, X.shape[0])
        for _ in range(self.epochs):
            order = rng.permutation(X.shape[0])
            for start in range(0, X.shape[0], bs):
                idx = order[start:start + bs]
                out, tape = forward(self.arch_, params, X[idx])
                _, grad = bce_loss(out, targets[idx])
                params, state = adam_step(params, backward(self.arch_, tape, grad), state)
        self.params_ = params
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X)
        hidden = Arch(self.arch_.layers[:2])
        sub = ParamSet([("w0", self.params_["w0"]), ("b0", self.params_["b0"])])
        out, _ = forward(hidden, sub, X)
        return out

    def predict(self, X):
        check_is_fitted(self, "params_")
        out, _ = forward(self.arch_, self.params_, check_array(X))
        return self.classes_[out.argmax(axis=1)]
