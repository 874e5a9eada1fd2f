"""Experiment configuration and the four harness commands.

A configuration is a JSON document with one object per section::

    {
      "seed": 0,
      "out": "runs/ring",
      "dataset":    {"kind": "ring", "n": 3000, "modes": 10, "radius": 1.0, "sigma": 0.05},
      "partition":  {"groups": [[0, 1, 2], [3, 4, 5, 6], [7, 8, 9]], "sizes": null},
      "gan":        {"latent_dim": 8, "hidden_dim": 128, "epochs": 50, "batch_size": 64, "lr": 0.001},
      "federation": {"rounds": 300, "local_epochs": 5, "client_lambda": 0.0001},
      "sweep":      {"lambdas": [1, 0.1, 0.01, 0.001, 0.0001, 1e-05, 1e-06], "n_samples": 2000},
      "evaluation": {"threshold": null, "prevalence": 0.01}
    }

Every key is optional; unknown keys are rejected so that typos fail loudly.
Relative paths are resolved against the directory holding the file.

Each command writes its outputs under ``out`` atomically and returns the
paths it wrote. CSV files start with a ``# fedsyn-csv <name>/<version>``
line, followed by a header row.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import seeding
from .data import LabeledDataset, generate_ring, load_idx, ring_centers
from .estimators import ClassifierEmbedding, FederatedGANSynthesizer, GANSynthesizer
from .exceptions import ConfigError, DomainError, PreconditionError
from .federation.wire import atomic_write_bytes, load_checkpoint, save_checkpoint
from .gan import GanModel, generate, model_from_paramset, sample_latent
from .metrics import fit_gaussian, frechet_distance, mode_coverage, nearest_mode

log = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1
DEFAULT_LAMBDAS = (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "ring"  # "ring" or "idx"
    n: int = 3000
    modes: int = 10
    radius: float = 1.0
    sigma: float = 0.05
    images: str | None = None
    labels: str | None = None
    limit: int | None = None  # keep only the first rows of an IDX file


@dataclass(frozen=True)
class PartitionConfig:
    groups: tuple = ((0, 1, 2), (3, 4, 5, 6), (7, 8, 9))
    sizes: tuple | None = None  # None: every row of the group
    clients: tuple | None = None  # client ids, default client0, client1, ...
    fail: dict = field(default_factory=dict)  # client id -> round at which it fails


@dataclass(frozen=True)
class GanConfig:
    latent_dim: int = 8
    hidden_dim: int = 128
    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    slope: float = 0.2
    dropout: float = 0.3
    output: str | None = None  # "linear" or "sigmoid"; None picks by dataset kind
    checkpoint_every: int = 10


@dataclass(frozen=True)
class FederationSection:
    rounds: int = 300
    local_epochs: int = 5
    batch_size: int = 256
    lr: float = 3e-4
    client_lambda: float = 1e-4
    server_lambda: float | None = None
    perturb_discriminator: bool = True
    keep_optimizer_state: bool = True
    checkpoint_every: int | None = None  # None: once, at the end of each round's local epochs
    n_jobs: int = 1


@dataclass(frozen=True)
class SweepConfig:
    lambdas: tuple = DEFAULT_LAMBDAS
    n_samples: int = 2000
    baseline: str | None = None  # default: <out>/central.fsyn


@dataclass(frozen=True)
class EvaluationConfig:
    threshold: float | None = None  # None: 4 sigma of the ring
    prevalence: float = 0.01
    n_samples: int = 1000  # gen-samples default
    embedding_epochs: int = 5


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    out: str = "fedsyn_out"
    dataset: DatasetConfig = DatasetConfig()
    partition: PartitionConfig = PartitionConfig()
    gan: GanConfig = GanConfig()
    federation: FederationSection = FederationSection()
    sweep: SweepConfig = SweepConfig()
    evaluation: EvaluationConfig = EvaluationConfig()

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def image_data(self) -> bool:
        return self.dataset.kind == "idx"

    @property
    def sigmoid_head(self) -> bool:
        output = self.gan.output or ("sigmoid" if self.image_data else "linear")
        return output == "sigmoid"

    @property
    def threshold(self) -> float:
        t = self.evaluation.threshold
        return 4 * self.dataset.sigma if t is None else t

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self):
        ds = self.dataset
        if ds.kind not in ("ring", "idx"):
            raise ConfigError(f"dataset.kind must be 'ring' or 'idx', got {ds.kind!r}")
        if ds.kind == "idx":
            for key in ("images", "labels"):
                path = getattr(ds, key)
                if path is None or not Path(path).is_file():
                    raise ConfigError(f"dataset.{key} does not name an existing file: {path!r}")
        if self.gan.output not in (None, "linear", "sigmoid"):
            raise ConfigError(f"gan.output must be 'linear' or 'sigmoid', got {self.gan.output!r}")
        lams = list(self.sweep.lambdas)
        if not lams or any(not (isinstance(x, (int, float)) and math.isfinite(x) and x > 0) for x in lams):
            raise ConfigError(f"sweep.lambdas must be positive numbers, got {lams!r}")
        if len(set(lams)) != len(lams):
            raise ConfigError("sweep.lambdas contains duplicates")
        fed = self.federation
        for key in ("client_lambda", "server_lambda"):
            lam = getattr(fed, key)
            if lam is not None and not lam > 0:
                raise ConfigError(f"federation.{key} must be > 0 or null, got {lam!r}")
        if fed.rounds < 1:
            raise ConfigError(f"federation.rounds must be >= 1, got {fed.rounds}")
        if self.partition.sizes is not None and len(self.partition.sizes) != len(self.partition.groups):
            raise ConfigError("partition.sizes must have one entry per group")
        if self.partition.clients is not None and len(self.partition.clients) != len(self.partition.groups):
            raise ConfigError("partition.clients must have one entry per group")
        return self


_SECTIONS = {
    "dataset": DatasetConfig, "partition": PartitionConfig, "gan": GanConfig,
    "federation": FederationSection, "sweep": SweepConfig, "evaluation": EvaluationConfig,
}


def _build(cls, raw, where):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    values = {}
    for key, val in raw.items():
        # JSON arrays become tuples so configs stay hashable and frozen
        if isinstance(val, list):
            val = tuple(tuple(v) if isinstance(v, list) else v for v in val)
        values[key] = val
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(raw: dict, base_dir=None) -> ExperimentConfig:
    """Build and validate a config; relative paths resolve against ``base_dir``."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    top = {}
    for key, val in raw.items():
        if key in _SECTIONS:
            top[key] = _build(_SECTIONS[key], val, key)
        elif key in ("seed", "out"):
            top[key] = val
        else:
            raise ConfigError(f"unknown top-level key {key!r}")
    cfg = ExperimentConfig(**top)
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {cfg.seed!r}")
    if base_dir is not None:
        cfg = _resolve_paths(cfg, Path(base_dir))
    return cfg.validate()


def _resolve_paths(cfg, base):
    def fix(p):
        return None if p is None else str(base / p)

    ds = replace(cfg.dataset, images=fix(cfg.dataset.images), labels=fix(cfg.dataset.labels))
    sweep = replace(cfg.sweep, baseline=fix(cfg.sweep.baseline))
    return replace(cfg, out=str(base / cfg.out), dataset=ds, sweep=sweep)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(raw, base_dir=path.parent)


# -- data ---------------------------------------------------------------------

def load_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    ds = cfg.dataset
    if ds.kind == "ring":
        return generate_ring(seeding.stream(cfg.seed, seeding.DATA), n=ds.n, modes=ds.modes,
                             radius=ds.radius, sigma=ds.sigma)
    data = load_idx(ds.images, ds.labels)
    if ds.limit is not None:
        data = LabeledDataset(data.samples[:ds.limit], data.labels[:ds.limit], data.label_count,
                              image_shape=data.image_shape)
    return data


def central_estimator(cfg: ExperimentConfig) -> GANSynthesizer:
    g = cfg.gan
    return GANSynthesizer(
        latent_dim=g.latent_dim, hidden_dim=g.hidden_dim, epochs=g.epochs, batch_size=g.batch_size,
        learning_rate=g.lr, beta1=g.beta1, beta2=g.beta2, leaky_slope=g.slope, dropout=g.dropout,
        output_activation="sigmoid" if cfg.sigmoid_head else "linear",
        checkpoint_every=g.checkpoint_every, random_state=cfg.seed,
    )


def federated_estimator(cfg: ExperimentConfig, client_lambda=None) -> FederatedGANSynthesizer:
    g, f, p = cfg.gan, cfg.federation, cfg.partition
    return FederatedGANSynthesizer(
        label_groups=p.groups, shard_sizes=p.sizes, rounds=f.rounds, local_epochs=f.local_epochs,
        client_lambda=f.client_lambda if client_lambda is None else client_lambda,
        server_lambda=f.server_lambda, perturb_discriminator=f.perturb_discriminator,
        latent_dim=g.latent_dim, hidden_dim=g.hidden_dim, batch_size=f.batch_size,
        learning_rate=f.lr, beta1=g.beta1, beta2=g.beta2, leaky_slope=g.slope, dropout=g.dropout,
        output_activation="sigmoid" if cfg.sigmoid_head else "linear",
        keep_optimizer_state=f.keep_optimizer_state,
        checkpoint_every=f.checkpoint_every or max(f.local_epochs, 1),
        client_ids=list(p.clients) if p.clients else None, client_failures=dict(p.fail),
        n_jobs=f.n_jobs, random_state=cfg.seed,
    )


def model_from_checkpoint(cfg: ExperimentConfig, path) -> GanModel:
    return model_from_paramset(load_checkpoint(path), cfg.gan.slope, cfg.gan.dropout, cfg.sigmoid_head)


# -- output helpers -----------------------------------------------------------

def write_csv(path, schema: str, header, rows) -> Path:
    buf = io.StringIO()
    buf.write(f"# fedsyn-csv {schema}/{CSV_SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([float(v) if isinstance(v, np.floating) else v for v in row])
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))
    return Path(path)


def read_csv(path):
    """Parse a fedsyn CSV into ``(schema_line, header, rows)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    rows = list(csv.reader(lines[1:]))
    return lines[0], rows[0], rows[1:]


def pgm_grid(images: np.ndarray, shape, cols: int = 5) -> bytes:
    """Tile up to 25 images in [0, 1] into one binary (P5) greyscale image."""
    images = np.asarray(images)[:25]
    rows_, cols_ = shape
    n = images.shape[0]
    if n == 0:
        return b"P5\n0 0\n255\n"
    ncol = min(cols, n)
    nrow = -(-n // ncol)
    canvas = np.zeros((nrow * rows_, ncol * cols_), dtype=np.uint8)
    tiles = np.rint(np.clip(images, 0.0, 1.0) * 255).astype(np.uint8).reshape(n, rows_, cols_)
    for k, tile in enumerate(tiles):
        r, c = divmod(k, ncol)
        canvas[r * rows_:(r + 1) * rows_, c * cols_:(c + 1) * cols_] = tile
    return f"P5\n{canvas.shape[1]} {canvas.shape[0]}\n255\n".encode("ascii") + canvas.tobytes()


def image_shape_for(cfg: ExperimentConfig, data_dim: int):
    side = math.isqrt(data_dim)
    if side * side != data_dim:
        raise ConfigError(f"cannot lay out {data_dim}-dimensional samples as square images")
    return side, side


def export_samples(cfg: ExperimentConfig, samples: np.ndarray, stem: Path) -> Path:
    """Ring data: ``<stem>.csv`` with x, y, nearest_mode. Image data: ``<stem>.pgm``."""
    if cfg.image_data:
        path = stem.with_suffix(".pgm")
        atomic_write_bytes(path, pgm_grid(samples, image_shape_for(cfg, samples.shape[1])))
        return path
    if samples.shape[1] != 2:
        raise ConfigError(f"ring exports need 2-D samples, got {samples.shape[1]} columns")
    centers = ring_centers(cfg.dataset.modes, cfg.dataset.radius)
    modes = nearest_mode(samples, centers) if len(samples) else np.zeros(0, dtype=int)
    rows = ((repr(float(x)), repr(float(y)), int(m)) for (x, y), m in zip(samples, modes))
    return write_csv(stem.with_suffix(".csv"), "samples", ["x", "y", "nearest_mode"], rows)


def report_rows(report, client_id=None, round_=None):
    for c in report.checkpoints:
        prefix = [] if client_id is None else [round_, client_id]
        yield prefix + [c.epoch, repr(float(c.real_acc)), repr(float(c.fake_acc)),
                        repr(float(c.disc_loss)), repr(float(c.gen_loss))]


REPORT_COLUMNS = ["epoch", "real_acc", "fake_acc", "disc_loss", "gen_loss"]


# -- commands -----------------------------------------------------------------

def cmd_train_central(cfg: ExperimentConfig) -> list[Path]:
    """Train the centrally pooled baseline; writes ``central.fsyn`` and ``central_report.csv``."""
    data = load_dataset(cfg)
    log.info("training central baseline on %d rows for %d epochs", len(data), cfg.gan.epochs)
    est = central_estimator(cfg).fit(data.samples)
    out = cfg.out_dir
    ckpt = out / "central.fsyn"
    save_checkpoint(ckpt, est.model_.to_paramset())
    report = write_csv(out / "central_report.csv", "central_report", REPORT_COLUMNS, report_rows(est.report_))
    return [ckpt, report]


def cmd_train_federated(cfg: ExperimentConfig) -> list[Path]:
    """Run the federation; writes the global checkpoint, history and aggregation log."""
    data = load_dataset(cfg)
    est = federated_estimator(cfg)
    log.info("federating %d clients for %d rounds", len(cfg.partition.groups), cfg.federation.rounds)
    est.fit(data.samples, data.labels)
    out = cfg.out_dir
    ckpt = out / "federated.fsyn"
    save_checkpoint(ckpt, est.model_.to_paramset())

    hist_rows, agg_rows = [], []
    f = cfg.federation
    for rec in est.history_.rounds:
        for cid, rep in rec.reports.items():
            hist_rows.extend(report_rows(rep, cid, rec.round))
            agg_rows.append([rec.round, cid, repr(float(rec.weights[cid])), repr(float(f.client_lambda)),
                             "" if f.server_lambda is None else repr(float(f.server_lambda)), rec.digest])
    history = write_csv(out / "federated_history.csv", "federated_history",
                        ["round", "client_id"] + REPORT_COLUMNS, hist_rows)
    agg = write_csv(out / "aggregation_log.csv", "aggregation_log",
                    ["round", "client_id", "weight", "client_lambda", "server_lambda", "digest"], agg_rows)
    return [ckpt, history, agg]


def lambda_tag(lam: float) -> str:
    return f"{lam:.0e}".replace("+", "")


def cmd_sweep_lambda(cfg: ExperimentConfig, baseline=None) -> list[Path]:
    """Score the federated generator against the baseline for every client noise scale."""
    baseline = Path(baseline or cfg.sweep.baseline or cfg.out_dir / "central.fsyn")
    if not baseline.is_file():
        raise PreconditionError(f"baseline checkpoint {baseline} does not exist; run train-central first")
    base_model = model_from_checkpoint(cfg, baseline)
    data = load_dataset(cfg)
    n = cfg.sweep.n_samples
    real = generate(base_model, sample_latent(seeding.stream(cfg.seed, seeding.EVAL, 0), n, base_model.latent_dim))
    latents = sample_latent(seeding.stream(cfg.seed, seeding.EVAL, 1), n, base_model.latent_dim)

    embed = None
    if cfg.image_data:
        embed = ClassifierEmbedding(epochs=cfg.evaluation.embedding_epochs, random_state=cfg.seed)
        embed.fit(data.samples, data.labels)
    features = (lambda x: x) if embed is None else embed.transform
    real_moments = fit_gaussian(features(real))

    out = cfg.out_dir
    rows, written = [], []
    for lam in cfg.sweep.lambdas:
        log.info("sweep: client lambda %g", lam)
        est = federated_estimator(cfg, client_lambda=float(lam)).fit(data.samples, data.labels)
        fake = generate(est.model_, latents)
        score = frechet_distance(real_moments, fit_gaussian(features(fake)))
        rows.append([repr(float(lam)), repr(float(score)), n, n, coverage_count(cfg, fake, embed)])
        written.append(export_samples(cfg, fake, out / f"sweep_samples_{lambda_tag(lam)}"))
    written.insert(0, write_csv(out / "sweep.csv", "sweep",
                                ["lambda", "score", "n_real", "n_fake", "mode_coverage_count"], rows))
    return written


def coverage_count(cfg: ExperimentConfig, samples: np.ndarray, embed=None) -> int:
    """Modes reached by at least the prevalence floor of ``samples``.

    Image data has no geometric modes, so classes predicted by the embedding
    classifier stand in for them.
    """
    if len(samples) == 0:
        return 0
    if embed is not None:
        counts = np.unique(embed.predict(samples), return_counts=True)[1]
        return int(np.sum(counts >= cfg.evaluation.prevalence * len(samples)))
    centers = ring_centers(cfg.dataset.modes, cfg.dataset.radius)
    covered, _ = mode_coverage(samples, centers, cfg.threshold, cfg.evaluation.prevalence)
    return len(covered)


def cmd_gen_samples(cfg: ExperimentConfig, checkpoint=None, n=None) -> list[Path]:
    """Export ``n`` samples of a checkpoint's generator as CSV (ring) or PGM (images)."""
    checkpoint = Path(checkpoint or cfg.out_dir / "central.fsyn")
    if not checkpoint.is_file():
        raise PreconditionError(f"checkpoint {checkpoint} does not exist")
    n = cfg.evaluation.n_samples if n is None else n
    if n < 0:
        raise DomainError(f"sample count must be >= 0, got {n}")
    model = model_from_checkpoint(cfg, checkpoint)
    rng = seeding.stream(cfg.seed, seeding.SAMPLE)
    samples = generate(model, sample_latent(rng, n, model.latent_dim)) if n else np.zeros((0, model.data_dim))
    return [export_samples(cfg, samples, cfg.out_dir / "samples")]
