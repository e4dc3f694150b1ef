import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dronemob.displacement import (
    FlightWalkLaw,
    WaitLaw,
    arc_displacement,
    displacement_for,
    fit_rayleigh_sum,
    joint_sz,
    rs_displacement,
    rw_displacement,
    rwp_displacement,
    sl_displacement,
)
from dronemob.errors import ParameterError
from dronemob.mobility import RW, RWP, sample_net_displacement
from dronemob.quadrature import gl_rule
from dronemob.simulator import ks_statistic
from dronemob.stochastic import Exponential, Rayleigh, Rng

V = 12.5


def test_sl_is_single_atom():
    d = sl_displacement(V, 40.0)
    assert d.atoms == ((500.0, 1.0),)
    assert float(d.cdf(499.9)) == 0.0
    assert float(d.cdf(500.0)) == 1.0


def test_time_zero_atom_at_origin(flight):
    for d in (sl_displacement(V, 0.0), rs_displacement(flight, V, 0.0)):
        assert d.atoms == ((0.0, 1.0),)


def test_rs_atom_mass_at_flight_mean(flight):
    d = rs_displacement(flight, V, 40.0)
    assert d.atom_mass == pytest.approx(math.exp(-math.pi / 4), rel=1e-12)
    assert d.atom_mass == pytest.approx(0.4559, abs=1e-4)
    assert d.total_mass == pytest.approx(1.0, abs=1e-12)


def test_rs_without_flight_end_is_sl():
    assert rs_displacement(None, V, 40.0) == sl_displacement(V, 40.0)


def test_arc_chord():
    d = arc_displacement(500.0, V, 40.0)
    assert d.atoms[0][0] == pytest.approx(1000.0 * math.sin(0.5))


def test_unsupported_model_rejected():
    with pytest.raises(ParameterError):
        displacement_for(object(), 10.0)


@pytest.fixture(scope="module")
def unit_law():
    return FlightWalkLaw(Rayleigh(1.0))


def test_joint_zero_outside_support(unit_law):
    assert float(joint_sz(unit_law, 2, 1.0, 1.5)) == 0.0
    assert float(joint_sz(unit_law, 4, 1.0, 1.5)) == 0.0


@pytest.mark.parametrize("n", [2, 3, 5])
def test_joint_normalised(unit_law, n):
    # polar substitution z = s cos(phi) removes the 1/sqrt(s^2 - z^2) edge of the two-flight law
    s, ws = gl_rule(0.0, 14.0, 300)
    phi, wp = gl_rule(np.zeros_like(s), np.full_like(s, math.pi / 2), 96)
    z = s[:, None] * np.cos(phi)
    dens = joint_sz(unit_law, n, s[:, None], z) * s[:, None] * np.sin(phi)
    assert np.sum(ws * np.sum(dens * wp, axis=1)) == pytest.approx(1.0, abs=1e-3)


def test_three_flight_net_displacement_is_rayleigh(unit_law):
    z = np.linspace(0.05, 8.0, 50)
    assert np.allclose(unit_law.z_pdf(3, z), Rayleigh(math.sqrt(3.0)).pdf(z), rtol=1e-12)


def test_three_flight_joint_is_restricted_to_support(unit_law):
    # the independence form is truncated to z <= s and renormalised, so its
    # z-marginal is not the exact Rayleigh law; it still carries unit mass
    # and puts more weight at small z than the untruncated product
    z = 0.5
    s, ws = gl_rule(z, 14.0, 600)
    marginal = float(np.sum(joint_sz(unit_law, 3, s, z) * ws))
    assert marginal > float(unit_law.z_pdf(3, z))


def test_fit_b_constant_two_flights():
    fit = fit_rayleigh_sum(2, 1.0)
    assert fit.b == pytest.approx(math.sqrt(3.0) / 2.0, rel=1e-12)


@pytest.mark.parametrize("n", [2, 5, 8])
def test_fit_mean_is_sum_of_means(n):
    fit = fit_rayleigh_sum(n, 398.94)
    s, w = gl_rule(0.0, 12.0 * n * 398.94, 800)
    mean = float(np.sum(s * fit.pdf(s) * w))
    assert mean == pytest.approx(n * 398.94 * math.sqrt(math.pi / 2), rel=0.01)


def test_fit_matches_independent_sums():
    fit = fit_rayleigh_sum(5, 398.94)
    sums = Rayleigh(398.94).sample(np.random.default_rng(2024), (200_000, 5)).sum(axis=1)
    assert ks_statistic(sums, fit.cdf) <= 0.02


def test_fit_rejects_single_flight():
    with pytest.raises(ParameterError):
        fit_rayleigh_sum(1, 1.0)


def test_wait_law_erlang_closed_form(hover):
    assert float(WaitLaw(hover).cdf(1, 10.0)) == pytest.approx(1 - 3 * math.exp(-2), rel=1e-12)
    assert float(WaitLaw(hover).cdf(-1, 0.0)) == 1.0


@pytest.fixture(scope="module")
def rw50(flight):
    return displacement_for(RW(V, flight), 50.0)


@pytest.fixture(scope="module")
def rwp300(flight, hover):
    return displacement_for(RWP(V, flight, hover), 300.0)


def test_rw_first_flight_atom(rw50, flight):
    assert rw50.atom_mass == pytest.approx(float(flight.sf(625.0)), rel=1e-12)


@pytest.mark.parametrize("which", ["rw50", "rwp300"])
def test_series_laws_close_at_vt(which, request):
    d = request.getfixturevalue(which)
    assert float(d.cdf(d.vt)) == 1.0
    assert float(d.cdf(d.vt * 1.5)) == 1.0
    assert abs(d.total_mass - 1.0) <= 1e-3
    grid = np.linspace(0.0, d.vt, 400)
    assert np.all(np.diff(d.cdf(grid)) >= -1e-12)
    assert np.all(d.cdf_left(grid) <= d.cdf(grid) + 1e-15)


def test_rw_matches_walk_simulation(rw50, flight):
    samples = sample_net_displacement(RW(V, flight), 50.0, 40_000, Rng(77))
    assert ks_statistic(samples, rw50.cdf, rw50.cdf_left, [a for a, _ in rw50.atoms]) <= 0.02


def test_rwp_matches_walk_simulation(rwp300, flight, hover):
    samples = sample_net_displacement(RWP(V, flight, hover), 300.0, 40_000, Rng(78))
    assert ks_statistic(samples, rwp300.cdf, rwp300.cdf_left, [a for a, _ in rwp300.atoms]) <= 0.02


def test_rwp_with_zero_hover_mass_is_still_normalised(flight):
    law = FlightWalkLaw(flight)
    d = rwp_displacement(law, WaitLaw(Exponential(0.5)), V, 40.0)
    assert abs(d.total_mass - 1.0) <= 1e-3


def test_exponential_flights_supported():
    d = rw_displacement(FlightWalkLaw(Exponential(500.0)), V, 100.0)
    assert abs(d.total_mass - 1.0) <= 1e-3


def test_displacement_cache_returns_same_object(flight):
    assert displacement_for(RW(V, flight), 50.0) is displacement_for(RW(V, flight), 50.0)


@settings(max_examples=40, deadline=None)
@given(mean=st.floats(min_value=10.0, max_value=5000.0), t=st.floats(min_value=0.0, max_value=500.0),
       frac=st.floats(min_value=0.0, max_value=1.2))
def test_rs_law_properties(mean, t, frac):
    d = rs_displacement(Rayleigh.from_mean(mean), V, t)
    assert d.total_mass == pytest.approx(1.0, abs=1e-9)
    l = frac * d.vt
    assert 0.0 <= float(d.cdf_left(l)) <= float(d.cdf(l)) <= 1.0
    if l >= d.vt:
        assert float(d.cdf(l)) == 1.0
