import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dronemob.density import (
    bin_average,
    density_for,
    empirical_density_oracle,
    intensity_measure,
    ring_kernel,
    rs_density,
    sl_density,
    udm_density_general,
    uim_density,
)
from dronemob.displacement import sl_displacement
from dronemob.errors import ParameterError
from dronemob.mobility import RS, SL
from dronemob.stochastic import Rayleigh, Rng
from dronemob.validation import boundary_jump

V = 12.5
LAM = 1e-6


def test_uim_profile():
    d = uim_density(LAM, 500.0)
    assert float(d(600.0)) == LAM
    assert float(d(400.0)) == 0.0
    assert np.all(uim_density(LAM, 0.0)(np.array([0.0, 1.0, 1e4])) == LAM)


def test_sl_two_thirds_at_u0():
    d = sl_density(LAM, 500.0, V, 40.0)
    assert float(d.ratio(500.0)) == pytest.approx(2.0 / 3.0, rel=1e-12)


def test_sl_outer_edge_and_inner_hole():
    assert float(sl_density(LAM, 500.0, V, 40.0).ratio(1000.0)) == 1.0
    assert float(sl_density(LAM, 500.0, V, 20.0).ratio(200.0)) == 0.0
    # once the serving drone has arrived the inner region refills
    assert float(sl_density(LAM, 200.0, V, 40.0).ratio(100.0)) == 1.0


def test_general_form_reproduces_sl():
    u = np.linspace(0.0, 1200.0, 601)
    for t in (20.0, 40.0, 60.0):
        gen = udm_density_general(LAM, 500.0, t, sl_displacement(V, t))
        assert np.allclose(gen.ratio(u), sl_density(LAM, 500.0, V, t).ratio(u), atol=1e-12)


def test_rs_without_flight_end_is_sl():
    u = np.linspace(0.0, 1200.0, 601)
    for t in (20.0, 40.0, 60.0):
        assert np.allclose(rs_density(LAM, 500.0, V, t, None).ratio(u), sl_density(LAM, 500.0, V, t).ratio(u), atol=1e-9)


def test_rs_settles_for_long_times(flight):
    u = np.linspace(0.0, 8000.0, 801)
    a = rs_density(LAM, 500.0, V, 400.0, flight).ratio(u)
    b = rs_density(LAM, 500.0, V, 800.0, flight).ratio(u)
    assert np.max(np.abs(a - b)) <= 1e-3


@pytest.mark.parametrize("name", ["SL", "RS", "RW", "RWP", "ARC"])
def test_homogeneous_beyond_reach(models, name):
    d = density_for(models[name], LAM, 500.0, 40.0)
    assert np.all(d.ratio(np.array([1000.0, 1001.0, 5000.0])) == 1.0)


@pytest.mark.parametrize("name", ["SL", "RS", "RW", "RWP"])
def test_small_u0_nearly_homogeneous(models, name):
    d = density_for(models[name], LAM, 1e-3, 20.0)
    u = np.linspace(1e-3, 5.0, 200)[1:]
    assert np.max(np.abs(d.ratio(u) - 1.0)) <= 1e-3


@pytest.mark.parametrize("name", ["SL", "RS", "RW", "RWP"])
def test_short_time_limit_is_uim(models, name):
    t = 1e-6
    d = density_for(models[name], LAM, 500.0, t)
    u = np.linspace(0.0, 1000.0, 1001)
    u = u[np.abs(u - 500.0) > V * t]
    assert np.max(np.abs(d.ratio(u) - uim_density(LAM, 500.0).ratio(u))) <= 1e-4


@pytest.mark.parametrize("name", ["SL", "RS", "RW", "RWP"])
def test_continuous_at_region_edges(models, name):
    for t in (20.0, 50.0, 200.0):
        d = density_for(models[name], 1.0, 500.0, t)
        for b in (abs(500.0 - V * t), 500.0 + V * t):
            if b > 0:
                assert boundary_jump(d, b) <= 1e-6


def test_hover_atom_jump_at_u0(models, hover):
    # drones still waiting out their first hover keep a hole of radius u0
    for u0, t in ((500.0, 20.0), (250.0, 40.0)):
        d = density_for(models["RWP"], 1.0, u0, t)
        assert u0 in d.breaks
        assert boundary_jump(d, u0) == pytest.approx(float(hover.sf(t)), rel=1e-5)


def test_ring_kernel_limits():
    assert float(ring_kernel(0.0, 100.0, 500.0)) == 1.0
    assert float(ring_kernel(0.0, 600.0, 500.0)) == 0.0
    assert float(ring_kernel(100.0, 700.0, 500.0)) == 0.0
    assert float(ring_kernel(500.0, 500.0, 500.0)) == pytest.approx(1.0 / 3.0)


def test_intensity_measure_examples():
    assert intensity_measure(uim_density(LAM, 0.0), 1000.0) == pytest.approx(LAM * math.pi * 1e6, rel=1e-9)
    assert intensity_measure(uim_density(LAM, 500.0), 1000.0) == pytest.approx(2.3562, abs=1e-4)


@pytest.mark.parametrize("name", ["RS", "RW", "RWP", "ARC"])
def test_straight_line_leaves_most_interferers(models, name):
    for t in (20.0, 40.0, 50.0, 200.0):
        rho = 500.0 + V * t
        sl = intensity_measure(density_for(models["SL"], LAM, 500.0, t), rho)
        other = intensity_measure(density_for(models[name], LAM, 500.0, t), rho)
        assert other <= sl * (1 + 1e-3)


def test_intensity_measure_rejects_bad_radius():
    with pytest.raises(ParameterError):
        intensity_measure(uim_density(LAM, 1.0), 0.0)


def test_empirical_oracle_at_time_zero(models):
    hist = empirical_density_oracle(models["SL"], 1e-3, 500.0, 0.0, np.linspace(0, 1000, 11), Rng(3), realizations=2000)
    assert np.all(np.abs(hist.ratio[:5]) < 0.05)
    assert np.all(hist.ratio[5:] == 1.0)


def test_empirical_oracle_matches_sl_profile(models):
    edges = np.linspace(0.0, 1000.0, 51)
    hist = empirical_density_oracle(models["SL"], 1e-3, 500.0, 40.0, edges, Rng(4), realizations=20000)
    ref = bin_average(sl_density(1.0, 500.0, V, 40.0), edges)
    assert np.max(np.abs(hist.ratio - ref)) <= 0.03


@pytest.mark.parametrize("name", ["RW", "RWP"])
def test_walks_homogenise(models, name):
    # the central deficit shrinks as the walks spread, roughly like u0^2 / (2 n sigma^2) after n flights
    worst = []
    for t in (50.0, 200.0, 600.0):
        hist = empirical_density_oracle(models[name], 1e-3, 500.0, t, 40, Rng(5), realizations=3000)
        worst.append(float(np.max(np.abs(hist.ratio - 1.0))))
    assert worst[0] > worst[1] > worst[2]
    assert worst[2] <= 0.08


def test_negative_arguments_rejected():
    with pytest.raises(ParameterError):
        sl_density(LAM, -1.0, V, 1.0)
    with pytest.raises(ParameterError):
        uim_density(LAM, 1.0).ratio(-1.0)


@settings(max_examples=60, deadline=None)
@given(u0=st.floats(min_value=0.0, max_value=3000.0), t=st.floats(min_value=0.0, max_value=300.0),
       u=st.floats(min_value=0.0, max_value=10000.0), mean=st.floats(min_value=50.0, max_value=2000.0))
def test_profiles_bounded(u0, t, u, mean):
    for d in (sl_density(LAM, u0, V, t), rs_density(LAM, u0, V, t, Rayleigh.from_mean(mean))):
        val = float(d(u))
        assert 0.0 <= val <= LAM
        if u > u0 + V * t or (t > 0 and u >= u0 + V * t):
            assert val == LAM
