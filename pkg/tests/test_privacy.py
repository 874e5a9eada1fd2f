import numpy as np
import pytest

from fedsyn.exceptions import DomainError, NumericDomainError
from fedsyn.params import ParamSet
from fedsyn.privacy import LaplaceSpec, laplace_inverse_cdf, perturb, sample_laplace


def test_laplace_moments():
    lam = 0.5
    x = sample_laplace(np.random.default_rng(0), LaplaceSpec(0.0, lam), 10**6)
    assert abs(np.median(x)) <= 0.01 * lam
    assert np.mean(np.abs(x)) == pytest.approx(lam, rel=0.02)
    assert np.var(x) == pytest.approx(2 * lam**2, rel=0.05)


def test_inverse_cdf_midpoint_is_location():
    assert laplace_inverse_cdf(0.0, 3.25, 7.0) == 3.25


def test_inverse_cdf_is_monotone():
    u = np.linspace(-0.49, 0.49, 101)
    assert np.all(np.diff(laplace_inverse_cdf(u, 0.0, 1.0)) > 0)


def test_same_seed_same_draws():
    spec = LaplaceSpec(0.0, 1.0)
    a = sample_laplace(np.random.default_rng(42), spec, 50)
    b = sample_laplace(np.random.default_rng(42), spec, 50)
    np.testing.assert_array_equal(a, b)


def test_draws_are_finite_when_uniform_hits_zero():
    class Edge:
        def random(self, n):
            return np.zeros(n)

    x = sample_laplace(Edge(), LaplaceSpec(0.0, 1.0), 3)
    assert np.all(np.isfinite(x))


@pytest.mark.parametrize("lam", [0.0, -1.0, float("inf")])
def test_bad_scale(lam):
    with pytest.raises(DomainError):
        LaplaceSpec(0.0, lam)


def test_nonpositive_count():
    with pytest.raises(DomainError):
        sample_laplace(np.random.default_rng(0), LaplaceSpec(), 0)


def make_params():
    rng = np.random.default_rng(0)
    return ParamSet([("w", rng.normal(size=(3, 4))), ("b", rng.normal(size=4))])


def test_vanishing_noise():
    p = make_params()
    out = perturb(p, LaplaceSpec(0.0, 1e-12), np.random.default_rng(1))
    assert out.is_aligned(p)
    assert np.max(np.abs(out.to_vector() - p.to_vector())) < 1e-9


def test_location_shift():
    p = make_params()
    out = perturb(p, LaplaceSpec(5.0, 1e-12), np.random.default_rng(1))
    np.testing.assert_allclose(out.to_vector() - p.to_vector(), 5.0, atol=1e-9)


def test_perturbed_zero_set_has_laplace_mad():
    zeros = ParamSet([("w", np.zeros((100, 100)))])
    out = perturb(zeros, LaplaceSpec(0.0, 0.1), np.random.default_rng(3)).to_vector()
    assert np.mean(np.abs(out)) == pytest.approx(0.1, rel=0.05)


def test_perturb_is_pure_given_seed():
    p = make_params()
    spec = LaplaceSpec(0.0, 0.3)
    assert perturb(p, spec, np.random.default_rng(8)) == perturb(p, spec, np.random.default_rng(8))
    assert perturb(p, spec, np.random.default_rng(8)) != perturb(p, spec, np.random.default_rng(9))


def test_perturb_rejects_nonfinite():
    with pytest.raises(NumericDomainError):
        perturb(ParamSet([("w", [np.nan])]), LaplaceSpec(), np.random.default_rng(0))
