import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dronemob.density import density_for, sl_density, uim_density
from dronemob.errors import ParameterError
from dronemob.mobility import SL
from dronemob.rate import (
    ChannelParams,
    InterferenceNodes,
    RateQuery,
    average_rate,
    ccdf_sir,
    conditional_laplace,
    interference_nodes,
    session_rate,
)

V = 12.5
LAM = 1e-6
CH = ChannelParams(h=100.0, alpha=3.0, m0=1, mx=1)

# nested adaptive quadrature with a closed-form interference tail (alpha = 3, m0 = mx = 1);
# shares no code with the package
ORACLE_UIM = 0.7498176349197676
ORACLE_SL_40 = 2.8075765981457645


def test_channel_rejects_small_alpha():
    with pytest.raises(ParameterError, match="α must exceed 2"):
        ChannelParams(alpha=1.5)
    with pytest.raises(ParameterError):
        ChannelParams(m0=0)


def test_query_validation():
    with pytest.raises(ParameterError):
        RateQuery("XYZ", SL(V), LAM, CH)
    with pytest.raises(ParameterError):
        RateQuery("UDM", SL(V), -1.0, CH)


def test_laplace_at_zero_is_one():
    d = sl_density(LAM, 500.0, V, 20.0)
    L = conditional_laplace(np.array([0.0]), 500.0, 20.0, d, CH)
    assert L[0, 0] == 1.0


def test_laplace_without_interferers_is_one():
    nodes = InterferenceNodes(np.array([1e-6, 1e-8]), np.zeros(2), 1)
    assert np.all(nodes.exponent(np.array([0.0, 1e3, 1e9]))[0] == 0.0)


def test_laplace_strictly_decreasing():
    d = sl_density(LAM, 500.0, V, 20.0)
    s = np.geomspace(1e3, 1e12, 40)
    L = conditional_laplace(s, 500.0, 20.0, d, CH)[0]
    assert np.all(np.diff(L) < 0.0)


def test_laplace_rejects_mismatched_u0():
    with pytest.raises(ParameterError):
        conditional_laplace(np.array([1.0]), 400.0, 20.0, sl_density(LAM, 500.0, V, 20.0), CH)


@pytest.mark.parametrize("mx", [1, 2, 3])
def test_laplace_derivatives_match_finite_differences(mx):
    ch = ChannelParams(h=100.0, alpha=3.0, m0=3, mx=mx)
    d = sl_density(LAM, 500.0, V, 20.0)
    s = np.array([3e6, 3e7])
    L = conditional_laplace(s, 500.0, 20.0, d, ch, k_max=2)
    eps = 1e-3 * s
    Lp = conditional_laplace(s + eps, 500.0, 20.0, d, ch, k_max=0)[0]
    Lm = conditional_laplace(s - eps, 500.0, 20.0, d, ch, k_max=0)[0]
    assert np.allclose(L[1], (Lp - Lm) / (2 * eps), rtol=1e-5)
    assert np.allclose(L[2], (Lp - 2 * L[0] + Lm) / eps**2, rtol=1e-3)


def test_ccdf_at_zero_threshold():
    nodes = interference_nodes(uim_density(LAM, 300.0), CH)
    assert float(ccdf_sir(0.0, 316.0, nodes, 1, 3.0)) == 1.0


@pytest.mark.parametrize("m0", [1, 2])
def test_sir_tail_matches_poisson_field(m0):
    """P[SIR >= gamma] from the Laplace form against a direct PPP draw (alpha = 4)."""
    lam, h, u0, radius = 1e-4, 100.0, 60.0, 5000.0
    ch = ChannelParams(h=h, alpha=4.0, m0=m0, mx=1)
    gen = np.random.default_rng(99 + m0)
    r0 = math.hypot(u0, h)
    hits = np.zeros(3)
    gammas = np.array([0.3, 1.0, 3.0])
    n = 4000
    for _ in range(n):
        k = gen.poisson(lam * math.pi * (radius**2 - u0**2))
        u = np.sqrt(gen.uniform(u0**2, radius**2, k))
        interference = np.sum(gen.exponential(1.0, k) * (u * u + h * h) ** -2)
        signal = gen.gamma(m0, 1.0 / m0) * r0**-4
        hits += signal / interference >= gammas
    nodes = interference_nodes(uim_density(lam, u0), ch)
    expected = ccdf_sir(gammas, r0, nodes, m0, 4.0)
    assert np.all(np.abs(hits / n - expected) <= 4 * np.sqrt(expected * (1 - expected) / n) + 2e-3)


def test_uim_rate_matches_quadrature_oracle():
    r = average_rate(RateQuery("UIM", SL(V), LAM, CH))
    assert r.value == pytest.approx(ORACLE_UIM, rel=1e-6)
    assert r.error <= 1e-3 * r.value


def test_sl_rate_matches_quadrature_oracle():
    r = average_rate(RateQuery("UDM", SL(V), LAM, CH, t=40.0))
    assert r.value == pytest.approx(ORACLE_SL_40, rel=1e-6)


def test_udm_at_time_zero_equals_uim():
    a = average_rate(RateQuery("UDM", SL(V), LAM, CH, t=0.0)).value
    assert a == pytest.approx(ORACLE_UIM, rel=1e-6)


def test_uim_time_invariant():
    a = average_rate(RateQuery("UIM", SL(V), LAM, CH, t=0.0)).value
    b = average_rate(RateQuery("UIM", SL(V), LAM, CH, t=100.0)).value
    assert a == b


@pytest.mark.parametrize("t", [0.0, 20.0, 40.0, 80.0])
def test_lower_height_higher_rate(t):
    low = average_rate(RateQuery("UDM", SL(V), LAM, ChannelParams(h=100.0), t=t)).value
    high = average_rate(RateQuery("UDM", SL(V), LAM, ChannelParams(h=200.0), t=t)).value
    assert low >= high


@pytest.mark.parametrize("t", [20.0, 80.0])
def test_stronger_fading_shape_higher_rate(t):
    m1 = average_rate(RateQuery("UDM", SL(V), LAM, ChannelParams(m0=1, mx=1), t=t)).value
    m2 = average_rate(RateQuery("UDM", SL(V), LAM, ChannelParams(m0=2, mx=2), t=t)).value
    assert m2 >= m1


def test_rate_grows_as_serving_drone_approaches():
    vals = [average_rate(RateQuery("UDM", SL(V), LAM, CH, t=t)).value for t in (0.0, 20.0, 40.0, 80.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_straight_line_rate_is_lowest(models):
    for name in ("RS", "RW"):
        for t in (20.0, 80.0):
            sl = average_rate(RateQuery("UDM", models["SL"], LAM, CH, t=t)).value
            other = average_rate(RateQuery("UDM", models[name], LAM, CH, t=t)).value
            assert sl <= other + 1e-9


def test_session_rate_of_constant_rate():
    q = RateQuery("UIM", SL(V), LAM, CH)
    assert session_rate(q, 120.0).value == pytest.approx(ORACLE_UIM, rel=1e-6)


def test_session_rate_is_running_average():
    q = RateQuery("UDM", SL(V), LAM, CH)
    r = session_rate(q, 120.0)
    assert r.meta["min_rate"] <= r.value <= r.meta["max_rate"]
    assert ORACLE_UIM < r.value < 4.0


def test_session_rate_straight_line_lowest(models):
    sl = session_rate(RateQuery("UDM", models["SL"], LAM, CH), 120.0).value
    rw = session_rate(RateQuery("UDM", models["RW"], LAM, CH), 120.0).value
    assert sl <= rw


def test_session_rate_rejects_empty_horizon():
    with pytest.raises(ParameterError):
        session_rate(RateQuery("UDM", SL(V), LAM, CH), 0.0)


@settings(max_examples=25, deadline=None)
@given(u0=st.floats(min_value=1.0, max_value=3000.0), t=st.floats(min_value=0.0, max_value=200.0),
       s1=st.floats(min_value=1e2, max_value=1e12), ratio=st.floats(min_value=1.01, max_value=100.0))
def test_laplace_bounded_and_monotone(u0, t, s1, ratio):
    d = density_for(SL(V), LAM, u0, t)
    L = conditional_laplace(np.array([s1, s1 * ratio]), u0, t, d, CH)[0]
    assert 0.0 <= L[1] <= L[0] <= 1.0
