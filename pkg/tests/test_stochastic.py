import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dronemob.errors import ParameterError
from dronemob.stochastic import (
    Deterministic,
    Disc,
    Erlang,
    Exponential,
    Rayleigh,
    Rng,
    Uniform,
    sample_gamma_fading,
    sample_ppp,
    sample_scalar,
)


def test_rng_same_address_same_stream():
    a = Rng(7, 3, (1, 2)).generator().random(5)
    b = Rng(7, 3, (1, 2)).generator().random(5)
    assert np.array_equal(a, b)


def test_rng_children_differ():
    base = Rng(7, 3)
    assert not np.array_equal(base.child(0).generator().random(5), base.child(1).generator().random(5))
    assert not np.array_equal(base.generator().random(5), base.with_stream(4).generator().random(5))


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_rng_rejects_out_of_range_seed(seed):
    with pytest.raises(ParameterError):
        Rng(seed)


def test_ppp_mean_count():
    counts = [len(sample_ppp(1e-6, Disc(radius=20_000.0), Rng(1, 0, (k,)))) for k in range(400)]
    expected = 1e-6 * math.pi * 20_000.0**2
    assert expected == pytest.approx(1256.637, abs=1e-3)
    assert abs(np.mean(counts) - expected) < 4 * math.sqrt(expected / len(counts))


def test_ppp_zero_radius_is_empty():
    pts = sample_ppp(1e-3, Disc(radius=0.0), Rng(1))
    assert len(pts) == 0 and pts.points.shape == (0, 2)


def test_ppp_points_inside_window():
    win = Disc(center=(10.0, -5.0), radius=300.0)
    pts = sample_ppp(1e-3, win, Rng(2)).points
    assert np.all(np.hypot(pts[:, 0] - 10.0, pts[:, 1] + 5.0) <= 300.0)


def test_ppp_rejects_bad_input():
    with pytest.raises(ParameterError):
        sample_ppp(0.0, Disc(radius=1.0), Rng(1))
    with pytest.raises(ParameterError):
        sample_ppp(1.0, Disc(radius=-1.0), Rng(1))


def test_rayleigh_from_mean():
    r = Rayleigh.from_mean(500.0)
    assert r.sigma == pytest.approx(398.942, abs=1e-3)
    assert r.mean == pytest.approx(500.0)


def test_deterministic_always_same():
    assert sample_scalar(Deterministic(12.5), Rng(3)) == 12.5
    assert np.all(sample_scalar(Deterministic(12.5), Rng(3), 100) == 12.5)


def test_erlang_cdf_value():
    # two exponential stages of mean 5 s evaluated at 10 s
    assert float(Erlang(2, 5.0).cdf(10.0)) == pytest.approx(1 - 3 * math.exp(-2), rel=1e-12)
    assert 1 - 3 * math.exp(-2) == pytest.approx(0.5940, abs=1e-4)


@pytest.mark.parametrize(
    "dist",
    [Rayleigh(2.0), Exponential(3.0), Erlang(3, 1.5), Uniform(1.0, 4.0)],
    ids=["rayleigh", "exponential", "erlang", "uniform"],
)
def test_sample_mean_matches_law(dist):
    x = sample_scalar(dist, Rng(11), 200_000)
    assert abs(x.mean() - dist.mean) < 5 * x.std() / math.sqrt(x.size)


@pytest.mark.parametrize(
    "dist",
    [Rayleigh(2.0), Exponential(3.0), Erlang(3, 1.5), Uniform(1.0, 4.0)],
    ids=["rayleigh", "exponential", "erlang", "uniform"],
)
def test_cdf_is_integral_of_pdf(dist):
    from scipy import integrate

    for x in (0.5, 2.0, 3.5):
        val, _ = integrate.quad(lambda s: float(dist.pdf(s)), 0.0, x, points=[1.0, 4.0] if x > 4 else None)
        assert float(dist.cdf(x)) == pytest.approx(val, abs=1e-9)


def test_gamma_fading_moments():
    g1 = sample_gamma_fading(1, Rng(5), 1_000_000)
    g2 = sample_gamma_fading(2, Rng(6), 1_000_000)
    assert abs(g1.mean() - 1.0) < 0.01
    assert abs(g2.mean() - 1.0) < 0.01
    assert abs(g2.var() - 0.5) < 0.01


def test_gamma_fading_rejects_fractional_shape():
    with pytest.raises(ParameterError):
        sample_gamma_fading(1.5, Rng(1))


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**64 - 1),
    stream=st.integers(min_value=0, max_value=10_000),
    lam=st.floats(min_value=1e-5, max_value=1e-2),
    radius=st.floats(min_value=0.0, max_value=200.0),
)
def test_ppp_reproducible_and_in_window(seed, stream, lam, radius):
    a = sample_ppp(lam, Disc(radius=radius), Rng(seed, stream)).points
    b = sample_ppp(lam, Disc(radius=radius), Rng(seed, stream)).points
    assert np.array_equal(a, b)
    assert np.all(np.hypot(a[:, 0], a[:, 1]) <= radius + 1e-9)


@settings(max_examples=60, deadline=None)
@given(mean=st.floats(min_value=1e-2, max_value=1e4), x=st.floats(min_value=0.0, max_value=1e5))
def test_scalar_laws_cdf_monotone_and_bounded(mean, x):
    for dist in (Rayleigh.from_mean(mean), Exponential(mean)):
        lo, hi = float(dist.cdf(x)), float(dist.cdf(x * 1.5 + 1.0))
        assert 0.0 <= lo <= hi <= 1.0
        assert float(dist.sf(x)) == pytest.approx(1.0 - lo, abs=1e-12)
