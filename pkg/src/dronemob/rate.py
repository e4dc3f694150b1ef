"""SIR-based rates: Laplace transform of the interference, average rate, session rate."""

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy import special

from .density import density_for, uim_density
from .errors import NumericalError, ParameterError
from .quadrature import cos_rule, gl_rule, legendre

__all__ = [
    "ChannelParams",
    "RateQuery",
    "RateResult",
    "RateSettings",
    "InterferenceNodes",
    "interference_nodes",
    "interference_exponent",
    "conditional_laplace",
    "ccdf_sir",
    "average_rate",
    "session_rate",
]


@dataclass(frozen=True)
class ChannelParams:
    """Drone height ``h`` (m), path-loss exponent ``alpha``, Nakagami shapes and transmit power.

    The power ``P`` cancels in the SIR; it is carried for completeness only.
    """

    h: float = 100.0
    alpha: float = 3.0
    m0: int = 1
    mx: int = 1
    P: float = 1.0

    def __post_init__(self):
        for name in ("h", "P"):
            val = float(getattr(self, name))
            if not math.isfinite(val) or val <= 0.0:
                raise ParameterError(f"{name} must be finite and > 0")
            object.__setattr__(self, name, val)
        alpha = float(self.alpha)
        if not math.isfinite(alpha) or alpha <= 2.0:
            raise ParameterError("α must exceed 2")
        object.__setattr__(self, "alpha", alpha)
        for name in ("m0", "mx"):
            val = getattr(self, name)
            if isinstance(val, bool) or int(val) != val or val < 1:
                raise ParameterError(f"{name} must be an integer >= 1")
            object.__setattr__(self, name, int(val))


@dataclass(frozen=True)
class RateSettings:
    """Quadrature controls for the rate integrals."""

    u_nodes: int = 40  # per panel of the interferer-distance integral
    tail_nodes: int = 48
    u0_nodes: int = 32  # per panel of the serving-distance integral
    gamma_nodes: int = 16  # per unit-width panel of log(1 + gamma)
    u0_cut: float = 1e-10  # truncate where exp(-pi lambda0 u0^2) drops below this
    ccdf_cut: float = 1e-8  # truncate the SIR threshold where the ccdf drops below this
    tol: float = 1e-3  # relative tolerance of the reported value


@dataclass(frozen=True)
class RateQuery:
    service: str
    model: object
    lam0: float
    channel: ChannelParams
    t: float = 0.0
    settings: RateSettings = field(default_factory=RateSettings)

    def __post_init__(self):
        if self.service not in ("UIM", "UDM"):
            raise ParameterError(f"service must be UIM or UDM, got {self.service!r}")
        lam0 = float(self.lam0)
        if not math.isfinite(lam0) or lam0 <= 0.0:
            raise ParameterError("lambda0 must be finite and > 0")
        if float(self.t) < 0.0:
            raise ParameterError("t must be >= 0")


@dataclass(frozen=True)
class RateResult:
    """Rate in nats per channel use, with an error estimate from a coarser rule."""

    value: float
    error: float
    meta: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class InterferenceNodes:
    """Quadrature form of the interference field: g^(j)(s) = sum(weights * phi_j(s a))."""

    a: np.ndarray
    weights: np.ndarray
    m: int

    def exponent(self, s, j_max=0):
        """g^(j)(s) for j = 0..j_max, shape ``(j_max + 1,) + s.shape``."""
        s = np.asarray(s, dtype=float)
        x = s[..., None] * self.a
        m = self.m
        out = np.empty((j_max + 1,) + s.shape)
        log1p = np.log1p(x)
        out[0] = np.sum(self.weights * -np.expm1(-m * log1p), axis=-1)
        for j in range(1, j_max + 1):
            coef = (-1.0) ** (j + 1) * special.poch(m, j)
            out[j] = np.sum(self.weights * coef * self.a**j * np.exp(-(m + j) * log1p), axis=-1)
        return out


def interference_nodes(density, ch, settings=None):
    """Tabulate 2 pi u lambda(u) du against a(u) = (u^2 + h^2)^(-alpha/2) / m_x."""
    st = settings or RateSettings()
    h2 = ch.h * ch.h
    outer = float(density.outer)
    cuts = sorted({0.0, *[b for b in density.breaks if 0.0 < b < outer], outer} | ({ch.h} if ch.h < outer else set()))
    a_parts, w_parts = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        u, w = cos_rule(lo, hi, st.u_nodes)
        a_parts.append((u * u + h2) ** (-0.5 * ch.alpha) / ch.mx)
        w_parts.append(2.0 * math.pi * u * density(u) * w)
    # beyond ``outer`` the intensity is lambda0: r^2 = w0 / y^2 flattens the tail
    w0 = outer * outer + h2
    y, wy = gl_rule(0.0, 1.0, st.tail_nodes)
    r2 = w0 / (y * y)
    a_parts.append(r2 ** (-0.5 * ch.alpha) / ch.mx)
    w_parts.append(math.pi * density.lam0 * 2.0 * w0 / y**3 * wy)
    return InterferenceNodes(np.concatenate(a_parts), np.concatenate(w_parts), ch.mx)


def interference_exponent(s, density, ch, j_max=0, settings=None):
    """g^(j)(s), j = 0..j_max, where L(s) = exp(-g(s))."""
    return interference_nodes(density, ch, settings).exponent(s, j_max)


def _laplace_from_exponent(g):
    """L^(k), k = 0..K, from g^(j) via L' = -g' L and Leibniz's rule."""
    K = g.shape[0] - 1
    L = np.empty_like(g)
    L[0] = np.exp(-g[0])
    for k in range(1, K + 1):
        acc = np.zeros_like(g[0])
        for j in range(k):
            acc = acc + math.comb(k - 1, j) * L[j] * (-g[k - j])
        L[k] = acc
    return L


def conditional_laplace(s, u0, t, density, ch, k_max=None, settings=None):
    """Laplace transform of the interference and its s-derivatives up to ``k_max`` (default m0 - 1).

    ``u0`` and ``t`` are carried by ``density``; they are accepted for a
    uniform call signature and checked for consistency.
    """
    if k_max is None:
        k_max = ch.m0 - 1
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0):
        raise ParameterError("s must be >= 0")
    if density.service == "UDM" and abs(density.u0 - float(u0)) > 1e-9 * max(1.0, u0):
        raise ParameterError("density was built for a different u0")
    g = interference_exponent(s, density, ch, int(k_max), settings)
    return _laplace_from_exponent(g)


def ccdf_sir(gamma, r0, nodes, m0, alpha):
    """P[SIR >= gamma | serving distance r0] (broadcast over gamma)."""
    gamma = np.asarray(gamma, dtype=float)
    s = m0 * gamma * r0**alpha
    g = nodes.exponent(s, m0 - 1)
    L = _laplace_from_exponent(g)
    total = np.zeros_like(s)
    for k in range(m0):
        total = total + (-s) ** k / math.factorial(k) * L[k]
    return np.clip(total, 0.0, 1.0)


def _rate_core(lam0, ch, density_of_u0, r0_of_u0, u0_cuts, st, gamma_nodes):
    u0_max = math.sqrt(-math.log(st.u0_cut) / (math.pi * lam0))
    cuts = sorted({0.0, u0_max, *[c for c in u0_cuts if 0.0 < c < u0_max]})
    u0s, wu = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        x, w = gl_rule(lo, hi, st.u0_nodes)
        u0s.append(x)
        wu.append(w)
    u0s = np.concatenate(u0s)
    wu = np.concatenate(wu) * 2.0 * math.pi * lam0 * u0s * np.exp(-math.pi * lam0 * u0s * u0s)
    xg, wg = legendre(gamma_nodes)
    per_u0 = []
    for u0, wt in zip(u0s, wu):
        nodes = interference_nodes(density_of_u0(u0), ch, st)
        r0 = r0_of_u0(u0)
        acc = 0.0
        lo = 0.0
        # gamma = e^x - 1 absorbs the 1/(1+gamma) factor: R = int ccdf dx
        while True:
            x = lo + 0.5 * (xg + 1.0)
            vals = ccdf_sir(np.expm1(x), r0, nodes, ch.m0, ch.alpha)
            acc += 0.5 * float(np.sum(vals * wg))
            lo += 1.0
            if vals[-1] < st.ccdf_cut:
                break
            if lo > 400.0:
                raise NumericalError("SIR ccdf did not decay", residual=float(vals[-1]))
        per_u0.append(acc)
    return float(np.dot(wu, per_u0)), u0s.size


def average_rate(q, displacement=None):
    """Average rate R(t) = E[log(1 + SIR(t))] in nats per channel use."""
    st = q.settings
    ch = q.channel
    lam0 = float(q.lam0)
    t = float(q.t) if q.service == "UDM" else 0.0
    v = q.model.v
    h2 = ch.h * ch.h

    if q.service == "UIM" or t == 0.0:
        dens = lambda u0: uim_density(lam0, u0)
        r0 = lambda u0: math.sqrt(u0 * u0 + h2)
        cuts = ()
    else:
        from .density import rs_density, sl_density, udm_density_general
        from .displacement import displacement_for
        from .mobility import RS, SL

        model = q.model
        if isinstance(model, SL):
            dens = lambda u0: sl_density(lam0, u0, v, t)
        elif isinstance(model, RS):
            dens = lambda u0: rs_density(lam0, u0, v, t, model.flight)
        else:
            disp = displacement or displacement_for(model, t)
            dens = lambda u0: udm_density_general(lam0, u0, t, disp)
        r0 = lambda u0: math.sqrt(max(u0 - v * t, 0.0) ** 2 + h2)
        cuts = (v * t,)

    value, n_u0 = _rate_core(lam0, ch, dens, r0, cuts, st, st.gamma_nodes)
    coarse_st = replace(st, u0_nodes=max(8, (2 * st.u0_nodes) // 3), u_nodes=max(8, (2 * st.u_nodes) // 3))
    coarse, _ = _rate_core(lam0, ch, dens, r0, cuts, coarse_st, max(4, st.gamma_nodes // 2))
    err = abs(value - coarse)
    meta = {"service": q.service, "t": t, "u0_nodes": n_u0, "gamma_nodes": st.gamma_nodes}
    if err > st.tol * abs(value):
        raise NumericalError(f"rate quadrature error {err:.3g} above tolerance", residual=err)
    return RateResult(value, err, meta)


def session_rate(q, T, nodes=6, panels=None):
    """Session rate SR(T) = (1/T) int_0^T R(t) dt by composite Gauss-Legendre in t."""
    T = float(T)
    if not math.isfinite(T) or T <= 0.0:
        raise ParameterError("T must be > 0")
    if q.service == "UIM":
        r = average_rate(q)
        return RateResult(r.value, r.error, {"T": T, "t_nodes": 1})

    def evaluate(n_panels):
        edges = np.linspace(0.0, T, n_panels + 1)
        ts, ws = gl_rule(edges[:-1], edges[1:], nodes)
        ts, ws = ts.ravel(), ws.ravel()
        vals = np.array([_cached_rate(q, float(ti)) for ti in ts])
        return float(np.dot(vals, ws) / T), ts, vals

    n_panels = panels or max(1, int(math.ceil(T / 120.0)))
    coarse, _, _ = evaluate(n_panels)
    fine, ts, vals = evaluate(2 * n_panels)
    err = abs(fine - coarse)
    if err > q.settings.tol * abs(fine):
        raise NumericalError(f"session-rate quadrature error {err:.3g} above tolerance", residual=err)
    return RateResult(fine, err, {"T": T, "t_nodes": ts.size, "min_rate": float(vals.min()), "max_rate": float(vals.max())})


_RATE_CACHE = {}


def _cached_rate(q, t):
    key = (q.service, q.model, q.lam0, q.channel, q.settings, t)
    if key not in _RATE_CACHE:
        _RATE_CACHE[key] = average_rate(replace(q, t=t)).value
    return _RATE_CACHE[key]
