import itertools
import math

import numpy as np
import pytest

from bartree.errors import ValidationError
from bartree.noise import GAUSSIAN, MIXTURE, NoiseSpec, sample_pair, sample_pairs, theoretical_moments
from bartree.seeding import make_rng


def mc_moments(spec, draws=10**7, chunk=10**6, seed=2024):
    """Sample fourth moment and sister-product second moment, each with its standard error."""
    rng = make_rng(seed)
    fourth, cross = [], []
    for _ in range(draws // chunk):
        e = sample_pairs(spec, rng, chunk)
        fourth.append(e[:, 0] ** 4)
        cross.append((e[:, 0] * e[:, 1]) ** 2)
    out = []
    for parts in (fourth, cross):
        values = np.concatenate(parts)
        out.append((values.mean(), values.std(ddof=1) / math.sqrt(values.size)))
    return out


@pytest.mark.slow
@pytest.mark.parametrize(
    "spec, tau4, nu2",
    [
        (NoiseSpec(GAUSSIAN, 1.0, 0.5), 3.0, 1.5),
        (NoiseSpec(GAUSSIAN, 1.0, 0.0), 3.0, 1.0),
        (NoiseSpec(MIXTURE, 1.0, 0.5), 2.0, 1.0),
    ],
)
def test_moments_monte_carlo(spec, tau4, nu2):
    moments = theoretical_moments(spec)
    assert moments.tau4 == pytest.approx(tau4)
    assert moments.nu2 == pytest.approx(nu2)
    (m4, se4), (m2, se2) = mc_moments(spec)
    assert abs(m4 - tau4) <= 3 * se4
    assert abs(m2 - nu2) <= 3 * se2


@pytest.mark.parametrize("sigma2, rho", [(1.0, 0.5), (2.0, 0.3), (0.7, 0.6)])
def test_mixture_moments_by_enumeration(sigma2, rho):
    # every sign pattern of (U, U', W) is equally likely
    c = rho / sigma2
    fourth = cross = 0.0
    for u, v, w in itertools.product((-1, 1), repeat=3):
        e0 = math.sqrt(sigma2) * (math.sqrt(1 - c) * u + math.sqrt(c) * w)
        e1 = math.sqrt(sigma2) * (math.sqrt(1 - c) * v + math.sqrt(c) * w)
        fourth += e0**4 / 8
        cross += (e0 * e1) ** 2 / 8
    moments = theoretical_moments(NoiseSpec(MIXTURE, sigma2, rho))
    assert moments.tau4 == pytest.approx(fourth, rel=1e-12)
    assert moments.nu2 == pytest.approx(cross, rel=1e-12)


def test_gaussian_golden_values():
    # frozen at first implementation; oracle is Box-Muller on the first two uniforms
    spec = NoiseSpec(GAUSSIAN, 1.0, 0.0)
    u1, u2 = make_rng(12345).random(2)
    r = math.sqrt(-2 * math.log(1 - u1))
    expected = (r * math.cos(2 * math.pi * u2), r * math.sin(2 * math.pi * u2))
    got = sample_pair(spec, make_rng(12345))
    assert got == pytest.approx(expected, rel=1e-14)
    assert got == (-0.292499190570774, 0.6559468512659343)


def test_empirical_covariance():
    e = sample_pairs(NoiseSpec(GAUSSIAN, 1.0, 0.5), make_rng(7), 10**6)
    assert abs(np.mean(e[:, 0] * e[:, 1]) - 0.5) <= 0.005


@pytest.mark.parametrize("family, rho", [(GAUSSIAN, 0.3), (MIXTURE, 0.3)])
def test_vectorised_matches_successive_calls(family, rho):
    spec = NoiseSpec(family, 1.5, rho)
    batch = sample_pairs(spec, make_rng(11), 50)
    rng = make_rng(11)
    single = np.array([sample_pair(spec, rng) for _ in range(50)])
    assert np.array_equal(batch, single)


def test_determinism():
    spec = NoiseSpec(GAUSSIAN, 1.0, 0.5)
    assert np.array_equal(sample_pairs(spec, make_rng(5), 100), sample_pairs(spec, make_rng(5), 100))


@pytest.mark.parametrize(
    "family, sigma2, rho",
    [(GAUSSIAN, 0.0, 0.0), (GAUSSIAN, 1.0, 1.0), (GAUSSIAN, -1.0, 0.0), (MIXTURE, 1.0, 0.0), ("laplace", 1.0, 0.0)],
)
def test_invalid_specs(family, sigma2, rho):
    with pytest.raises(ValidationError):
        NoiseSpec(family, sigma2, rho)


def test_tiny_positive_variance_accepted():
    spec = NoiseSpec(GAUSSIAN, 2.2250738585072014e-308, 0.0)
    assert np.all(np.isfinite(sample_pairs(spec, make_rng(1), 10)))
