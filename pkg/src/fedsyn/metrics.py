"""Fréchet distance between Gaussian fits and mode-coverage statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import AlignmentError, DomainError

JACOBI_TOL = 1e-12
SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class GaussianMoments:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class FrechetReport:
    score: float
    lambda_used: float
    moments_real: GaussianMoments
    moments_fake: GaussianMoments
    sample_counts: tuple[int, int]


def fit_gaussian(features) -> GaussianMoments:
    """Sample mean and unbiased covariance, symmetrized."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DomainError(f"features must be a matrix, got shape {x.shape}")
    if x.shape[0] < 2:
        raise DomainError(f"need at least 2 rows to fit a Gaussian, got {x.shape[0]}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    return GaussianMoments(mean, (cov + cov.T) / 2.0)


def jacobi_eigh(a, tol: float = JACOBI_TOL, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors in columns,
    eigenvalues ascending. Sweeps stop once the off-diagonal Frobenius norm
    drops below ``tol`` times the norm of ``a``.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        return np.diag(a).copy(), v
    threshold = tol * scale
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                gap = a[q, q] - a[p, p]
                if abs(apq) < 1e-300 or abs(gap) > 1e150 * abs(apq):
                    # rotation angle underflows; t ~ apq / gap
                    t = apq / gap
                else:
                    theta = gap / (2.0 * apq)
                    t = 1.0 if theta == 0.0 else (
                        np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                a[:, p] = c * col_p - s * a[:, q]
                a[:, q] = s * col_p + c * a[:, q]
                row_p = a[p, :].copy()
                a[p, :] = c * row_p - s * a[q, :]
                a[q, :] = s * row_p + c * a[q, :]
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def matrix_sqrt_psd(m) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix.

    Negative eigenvalues (round-off) are clamped to zero.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {m.shape}")
    asym = np.max(np.abs(m - m.T)) if m.size else 0.0
    if asym > SYMMETRY_TOL * max(1.0, np.max(np.abs(m))):
        raise DomainError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    w, v = jacobi_eigh((m + m.T) / 2.0)
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return (root + root.T) / 2.0


def frechet_distance(a: GaussianMoments, b: GaussianMoments) -> float:
    """Squared 2-Wasserstein distance between two Gaussians."""
    if a.mean.shape != b.mean.shape or a.cov.shape != b.cov.shape:
        raise AlignmentError(f"dimension mismatch: {a.mean.shape} vs {b.mean.shape}")
    diff = a.mean - b.mean
    root_a = matrix_sqrt_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    cross = matrix_sqrt_psd((inner + inner.T) / 2.0)
    score = diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(cross)
    return float(max(score, 0.0))


def mode_coverage(samples, centers, threshold: float, prevalence: float = 0.01):
    """Which mixture modes a sample set reaches.

    Each sample is assigned to its nearest center and counted if it lies
    within ``threshold`` of it. A mode is covered when its count is at least
    ``prevalence`` of all samples.

    Returns
    -------
    covered : frozenset of int
    counts : ndarray of shape (n_modes,)
    """
    if not threshold > 0:
        raise DomainError(f"threshold must be positive, got {threshold}")
    x = np.asarray(samples, dtype=np.float64).reshape(-1, np.shape(centers)[1])
    c = np.asarray(centers, dtype=np.float64)
    counts = np.zeros(c.shape[0], dtype=np.int64)
    if x.shape[0] == 0:
        return frozenset(), counts
    d2 = ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
    nearest = d2.argmin(axis=1)
    close = d2[np.arange(x.shape[0]), nearest] <= threshold * threshold
    counts = np.bincount(nearest[close], minlength=c.shape[0])
    covered = frozenset(int(k) for k in np.flatnonzero(counts >= prevalence * x.shape[0]))
    return covered, counts


def nearest_mode(samples, centers) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    c = np.asarray(centers, dtype=np.float64)
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2).argmin(axis=1)


def frechet_report(real_features, fake_features, lambda_used: float = float("nan")) -> FrechetReport:
    real = fit_gaussian(real_features)
    fake = fit_gaussian(fake_features)
    return FrechetReport(
        score=frechet_distance(real, fake),
        lambda_used=lambda_used,
        moments_real=real,
        moments_fake=fake,
        sample_counts=(len(real_features), len(fake_features)),
    )
