"""Datasets: the procedural Gaussian ring and the IDX image format."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DomainError, FormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class LabeledDataset:
    samples: np.ndarray
    labels: np.ndarray
    label_count: int
    image_shape: tuple[int, int] | None = None
    centers: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise DomainError(f"samples must be a matrix, got shape {self.samples.shape}")
        if self.labels.shape != (self.samples.shape[0],):
            raise DomainError("samples and labels must have the same number of rows")

    @property
    def feature_dim(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.samples.shape[0]


def ring_centers(modes: int = 10, radius: float = 1.0) -> np.ndarray:
    """Centers ``radius * (cos 2pi k/modes, sin 2pi k/modes)``, k = 0..modes-1."""
    angles = 2.0 * np.pi * np.arange(modes) / modes
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def generate_ring(rng: np.random.Generator, n: int = 3000, modes: int = 10,
                  radius: float = 1.0, sigma: float = 0.05) -> LabeledDataset:
    """Mixture of ``modes`` isotropic Gaussians evenly spaced on a circle.

    Sample ``i`` belongs to mode ``i % modes`` so label counts differ by at
    most one.
    """
    if modes < 2:
        raise DomainError(f"need at least two modes, got {modes}")
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if n < modes:
        raise DomainError(f"need n >= modes, got n={n}, modes={modes}")
    centers = ring_centers(modes, radius)
    labels = np.arange(n) % modes
    samples = centers[labels] + sigma * rng.standard_normal((n, 2))
    return LabeledDataset(samples, labels.astype(np.int64), modes, centers=centers)


def _read_header(buf: bytes, magic: int, what: str):
    if len(buf) < 4:
        raise FormatError(f"{what}: truncated magic number", offset=len(buf))
    (got,) = struct.unpack_from(">I", buf, 0)
    if got != magic:
        raise FormatError(f"{what}: bad magic 0x{got:08x}, expected 0x{magic:08x}", offset=0)
    ndims = magic & 0xFF
    end = 4 + 4 * ndims
    if len(buf) < end:
        raise FormatError(f"{what}: truncated dimension header", offset=len(buf))
    dims = struct.unpack_from(f">{ndims}I", buf, 4)
    return dims, end


def _maybe_gunzip(buf: bytes) -> bytes:
    if buf[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(buf)
        except (OSError, EOFError) as exc:
            raise FormatError(f"corrupt gzip stream: {exc}", offset=0) from exc
    return buf


def parse_idx(images: bytes, labels: bytes) -> LabeledDataset:
    """Decode an IDX image file and its label file from raw bytes.

    Pixels are scaled into [0, 1] by 1/255. Any malformed input raises
    :class:`FormatError`.
    """
    images = _maybe_gunzip(bytes(images))
    labels = _maybe_gunzip(bytes(labels))
    (count, rows, cols), off = _read_header(images, IDX_IMAGES_MAGIC, "images")
    (n_labels,), loff = _read_header(labels, IDX_LABELS_MAGIC, "labels")
    if n_labels != count:
        raise FormatError(f"image count {count} != label count {n_labels}", offset=4)
    need = count * rows * cols
    have = len(images) - off
    if have < need:
        raise FormatError(f"images: truncated pixel data, need {need} bytes, have {have}",
                          offset=len(images))
    if have > need:
        raise FormatError(f"images: {have - need} trailing bytes", offset=off + need)
    if len(labels) - loff != count:
        where = len(labels) if len(labels) - loff < count else loff + count
        raise FormatError(f"labels: expected {count} label bytes, have {len(labels) - loff}",
                          offset=where)
    pix = np.frombuffer(images, dtype=np.uint8, count=need, offset=off)
    samples = pix.reshape(count, rows * cols).astype(np.float64) / 255.0
    lab = np.frombuffer(labels, dtype=np.uint8, count=count, offset=loff).astype(np.int64)
    label_count = max(10, int(lab.max()) + 1) if count else 10
    return LabeledDataset(samples, lab, label_count, image_shape=(rows, cols))


def load_idx(images_path, labels_path) -> LabeledDataset:
    return parse_idx(Path(images_path).read_bytes(), Path(labels_path).read_bytes())


def encode_idx(images: np.ndarray, labels: np.ndarray) -> tuple[bytes, bytes]:
    """Write uint8 ``images`` of shape (n, rows, cols) and labels as IDX bytes."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    img = struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols) + images.tobytes()
    lab = struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]) + labels.tobytes()
    return img, lab
