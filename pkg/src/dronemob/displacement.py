"""Distributions of the net displacement L(t) for the SL, RS, RW and RWP models.

``L(t)`` is a mixed law on ``[0, v t]``: a continuous part plus atoms (at
``v t`` for drones that never turned, at 0 for RWP drones still in their
first hover). RW/RWP laws are assembled from the flight-count series; the
continuous part is tabulated on the grid ``l = v t (1 - (1 - u)^2)``, in
which the ``1/sqrt(v t - l)`` edge singularity becomes a smooth function
of ``u``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy import optimize, signal, special
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import NumericalError, ParameterError
from .quadrature import cos_rule, gl_rule, legendre, sqrt_end_rule
from .stochastic import Deterministic, Erlang, Exponential, Rayleigh, Rng, _positive

__all__ = [
    "NetDisplacementDistribution",
    "FlightWalkLaw",
    "WaitLaw",
    "RayleighSumFit",
    "SeriesSettings",
    "sl_displacement",
    "rs_displacement",
    "arc_displacement",
    "rw_displacement",
    "rwp_displacement",
    "displacement_for",
    "joint_sz",
    "fit_rayleigh_sum",
]

_FIT_SEED = 0x5EED5EED


# --------------------------------------------------------------------------
# continuous parts


class _LawPart:
    """Continuous part equal to a scalar law's density restricted to [0, upper)."""

    def __init__(self, law, upper):
        self.law = law
        self.upper = float(upper)

    def pdf(self, l):
        l = np.asarray(l, dtype=float)
        return np.where((l >= 0.0) & (l < self.upper), self.law.pdf(l), 0.0)

    def cdf(self, l):
        l = np.clip(np.asarray(l, dtype=float), 0.0, self.upper)
        return self.law.cdf(l)

    @property
    def mass(self):
        return float(self.law.cdf(self.upper))

    def integrate(self, h, lo, hi, n=48):
        lo = np.clip(np.asarray(lo, dtype=float), 0.0, self.upper)
        hi = np.clip(np.asarray(hi, dtype=float), 0.0, self.upper)
        hi = np.maximum(hi, lo)
        x, w = cos_rule(lo, hi, n)
        return np.sum(self.law.pdf(x) * h(x) * w, axis=-1)


class _TabulatedPart:
    """Continuous part tabulated in ``u`` with ``l = D (1 - (1 - u)^2)``.

    ``q(u) = f(l(u)) dl/du`` is interpolated by a cubic spline and the
    cumulative mass by a monotone PCHIP.
    """

    def __init__(self, upper, u, q, cdf_u, cdf_vals):
        self.upper = float(upper)
        self._q = CubicSpline(u, q, bc_type="not-a-knot", extrapolate=True)
        self._cdf = PchipInterpolator(cdf_u, np.maximum.accumulate(np.maximum(cdf_vals, 0.0)), extrapolate=False)
        self.u_nodes = np.asarray(u)
        self.q_nodes = np.asarray(q)
        self.cdf_u = np.asarray(cdf_u)
        self.cdf_nodes = np.asarray(cdf_vals)

    def _u_of(self, l):
        r = np.clip(1.0 - np.asarray(l, dtype=float) / self.upper, 0.0, 1.0)
        return 1.0 - np.sqrt(r)

    def pdf(self, l):
        l = np.asarray(l, dtype=float)
        u = self._u_of(l)
        jac = 2.0 * self.upper * (1.0 - u)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.maximum(self._q(u), 0.0) / jac
        return np.where((l >= 0.0) & (l < self.upper), val, 0.0)

    def cdf(self, l):
        l = np.asarray(l, dtype=float)
        out = self._cdf(self._u_of(l))
        out = np.where(l <= 0.0, 0.0, out)
        return np.where(l >= self.upper, self.cdf_nodes[-1], out)

    @property
    def mass(self):
        return float(self._q.integrate(0.0, 1.0))

    def integrate(self, h, lo, hi, n=48):
        ulo = self._u_of(lo)
        uhi = np.maximum(self._u_of(hi), ulo)
        u, w = cos_rule(ulo, uhi, n)
        l = self.upper * (1.0 - (1.0 - u) ** 2)
        return np.sum(np.maximum(self._q(u), 0.0) * h(l) * w, axis=-1)


# --------------------------------------------------------------------------
# mixed distribution


@dataclass(frozen=True)
class NetDisplacementDistribution:
    """Law of L(t): atoms ``((location, mass), ...)`` plus an optional continuous part.

    ``pdf`` is the density of the continuous part only; ``cdf`` includes the
    atoms and is right-continuous.
    """

    t: float
    v: float
    atoms: tuple = ()
    continuous: object = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def vt(self):
        return self.v * self.t

    @property
    def atom_mass(self):
        """Probability that L(t) = v t exactly."""
        return sum(m for loc, m in self.atoms if abs(loc - self.vt) <= 1e-9 * max(1.0, self.vt))

    @property
    def zero_mass(self):
        return sum(m for loc, m in self.atoms if loc == 0.0)

    @property
    def continuous_mass(self):
        return 0.0 if self.continuous is None else self.continuous.mass

    @property
    def total_mass(self):
        return sum(m for _, m in self.atoms) + self.continuous_mass

    def pdf(self, l):
        if self.continuous is None:
            return np.zeros_like(np.asarray(l, dtype=float))
        return self.continuous.pdf(l)

    def _atom_cdf(self, l, strict):
        l = np.asarray(l, dtype=float)
        out = np.zeros_like(l)
        for loc, m in self.atoms:
            out = out + m * ((l > loc) if strict else (l >= loc))
        return out

    def cdf(self, l):
        l = np.asarray(l, dtype=float)
        out = self._atom_cdf(l, strict=False)
        if self.continuous is not None:
            out = out + self.continuous.cdf(l)
        out = np.where(l >= self.vt, 1.0, out)
        return np.clip(out, 0.0, 1.0)

    def cdf_left(self, l):
        """Left limit P[L < l]."""
        l = np.asarray(l, dtype=float)
        out = self._atom_cdf(l, strict=True)
        if self.continuous is not None:
            out = out + self.continuous.cdf(l)
        return np.clip(np.where(l > self.vt, 1.0, out), 0.0, 1.0)

    def expect(self, h, lo=0.0, hi=None, n=48):
        """E[h(L); lo <= L <= hi] with ``h`` vectorised; ``lo``/``hi`` may be arrays.

        ``h`` must accept node arrays with one more trailing axis than
        ``lo``/``hi``.
        """
        hi = self.vt if hi is None else hi
        lo_arr = np.asarray(lo, dtype=float)
        hi_arr = np.asarray(hi, dtype=float)
        total = np.zeros(np.broadcast(lo_arr, hi_arr).shape)
        for loc, m in self.atoms:
            inside = (loc >= lo_arr) & (loc <= hi_arr)
            if np.any(inside):
                val = h(np.full(total.shape + (1,), loc))[..., 0]
                total = total + np.where(inside, m * val, 0.0)
        if self.continuous is not None:
            total = total + self.continuous.integrate(h, lo_arr, hi_arr, n)
        return total

    def moment(self, k):
        return float(self.expect(lambda x: x**k))


# --------------------------------------------------------------------------
# sums of Rayleigh flights


def _double_factorial_odd(n):
    """(2n - 1)!!"""
    return math.prod(range(1, 2 * n, 2))


def _eq10_pdf(s, n, a0, a1, a2, b):
    """Rayleigh-sum density in closed form, including the 1/sqrt(n) Jacobian of y = s/sqrt(n)."""
    s = np.asarray(s, dtype=float)
    y = s / math.sqrt(n)
    log_norm = (n - 1) * math.log(2.0) + special.gammaln(n)
    ypos = np.where(y > 0.0, y, 1.0)
    main = np.where(y > 0.0, np.exp((2 * n - 1) * np.log(ypos) - y * y / (2.0 * b) - log_norm - n * math.log(b)), 0.0)
    yy = y - a2
    corr = (
        yy ** (2 * n - 2)
        * np.exp(-a1 * yy * yy / (2.0 * b) - log_norm - math.log(b) - n * math.log(b / a1))
        * a0
        * (b * (2 * n * y - a2) - a1 * y * yy * yy)
    )
    return np.where(s >= 0.0, (main - corr) / math.sqrt(n), 0.0)


@dataclass(frozen=True)
class RayleighSumFit:
    """Fitted closed-form density of the sum of ``n`` i.i.d. Rayleigh(sigma) lengths."""

    n: int
    sigma: float
    a0: float
    a1: float
    a2: float
    b: float
    residual: float

    def pdf(self, s):
        return np.maximum(_eq10_pdf(s, self.n, self.a0, self.a1, self.a2, self.b), 0.0)

    def cdf(self, x, nodes=96):
        x = np.asarray(x, dtype=float)
        s, w = gl_rule(np.zeros_like(x), np.maximum(x, 0.0), nodes)
        return np.clip(np.sum(self.pdf(s) * w, axis=-1), 0.0, 1.0)


@lru_cache(maxsize=256)
def _unit_rayleigh_fit(n, seed, stream, samples, bins):
    gen = Rng(seed, stream, (n,)).generator()
    sums = np.empty(samples)
    chunk = max(1, 4_000_000 // n)
    for start in range(0, samples, chunk):
        stop = min(samples, start + chunk)
        sums[start:stop] = gen.rayleigh(1.0, (stop - start, n)).sum(axis=1)
    hist, edges = np.histogram(sums, bins=bins, density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    b = _double_factorial_odd(n) ** (1.0 / n) / n

    def resid(p):
        return _eq10_pdf(centers, n, p[0], p[1], p[2], b) - hist

    best = None
    for a1 in (1.0, 0.5, 2.0):
        for a2 in (0.0, 0.5, -0.5):
            try:
                res = optimize.least_squares(
                    resid, [0.02, a1, a2], bounds=([-np.inf, 1e-6, -np.inf], [np.inf, np.inf, np.inf]), method="trf"
                )
            except (ValueError, FloatingPointError):
                continue
            if np.all(np.isfinite(res.x)) and (best is None or res.cost < best.cost):
                best = res
    if best is None or not best.success:
        raise NumericalError(
            f"Rayleigh-sum fit did not converge for n={n}", residual=None if best is None else float(best.cost)
        )
    rms = math.sqrt(2.0 * best.cost / bins)
    # reject fits whose shape is visibly off the histogram
    if rms > 0.05 * hist.max():
        raise NumericalError(f"Rayleigh-sum fit too poor for n={n}", residual=rms)
    return tuple(float(a) for a in best.x) + (b, rms)


def fit_rayleigh_sum(n, sigma, rng=None, samples=1_000_000, bins=200):
    """Least-squares fit of the closed-form Rayleigh-sum density to a Monte Carlo histogram.

    The fit runs in units of ``sigma`` (the law is scale-free) and is
    rescaled: ``a0`` and ``a1`` are dimensionless, ``a2`` scales with sigma
    and ``b = sigma^2 ((2n-1)!!)^(1/n) / n``.
    """
    n = int(n)
    if n < 2:
        raise ParameterError("fit_rayleigh_sum needs n >= 2")
    sigma = _positive("sigma", sigma)
    rng = rng or Rng(_FIT_SEED)
    a0, a1, a2, b, rms = _unit_rayleigh_fit(n, int(rng.seed), int(rng.stream), int(samples), int(bins))
    return RayleighSumFit(n, sigma, a0, a1, a2 * sigma, b * sigma**2, rms / sigma)


# --------------------------------------------------------------------------
# numeric convolution for laws without closed-form sums


class _ConvolutionTable:
    """Densities of sums of i.i.d. copies of ``law`` on a uniform grid."""

    def __init__(self, law, offset=0):
        self.law = law
        self.offset = offset  # number of copies for index 0 is offset + 1
        self.h = law.mean / 200.0
        self._pdfs = {}

    def _grid_len(self, k):
        span = k * self.law.mean + 12.0 * math.sqrt(k * self.law.variance) + self.law.support[0] * k + self.law.mean
        return int(math.ceil(span / self.h)) + 2

    def pdf_values(self, k):
        """Density of the sum of ``k`` copies on grid ``h * arange``."""
        if k not in self._pdfs:
            if k == 1:
                grid = self.h * np.arange(self._grid_len(1))
                self._pdfs[1] = self.law.pdf(grid)
            else:
                prev = self.pdf_values(k - 1)
                base = self.pdf_values(1)
                out = signal.fftconvolve(prev, base)[: self._grid_len(k)] * self.h
                self._pdfs[k] = np.maximum(out, 0.0)
        return self._pdfs[k]

    def pdf(self, k, x):
        vals = self.pdf_values(k)
        grid = self.h * np.arange(vals.size)
        return np.interp(np.asarray(x, dtype=float), grid, vals, left=0.0, right=0.0)

    def cdf(self, k, x):
        vals = self.pdf_values(k)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * self.h)])
        grid = self.h * np.arange(vals.size)
        return np.clip(np.interp(np.asarray(x, dtype=float), grid, cum, left=0.0, right=cum[-1]), 0.0, 1.0)


# --------------------------------------------------------------------------
# flight and wait laws


class FlightWalkLaw:
    """Distributions of total length S_n, net displacement Z_n and their joint law.

    Rayleigh flights use the fitted closed form for S_n and the exact
    Rayleigh(sigma sqrt(n)) law for Z_n; exponential flights have Erlang
    S_n; other laws use numeric convolution for S_n. Non-Rayleigh Z_n uses
    the large-n Rayleigh limit with parameter sqrt(n E[R^2] / 2).

    For n >= 3 the joint density treats S_n and Z_n as independent, with
    Z_n restricted to [0, s] and renormalised there.
    """

    def __init__(self, flight, rng=None):
        if isinstance(flight, Deterministic) or not flight.continuous:
            raise ParameterError("analytic walk laws need a flight law with a density")
        self.flight = flight
        self.rng = rng or Rng(_FIT_SEED)
        self._fits = {}
        self._conv = None
        self.rayleigh = isinstance(flight, Rayleigh)

    def __repr__(self):
        return f"FlightWalkLaw({self.flight!r})"

    # flights
    def f_r(self, r):
        return self.flight.pdf(r)

    def survival(self, r):
        return self.flight.sf(r)

    # totals S_n
    def fit(self, n):
        if n not in self._fits:
            self._fits[n] = fit_rayleigh_sum(n, self.flight.sigma, self.rng)
        return self._fits[n]

    def s_pdf(self, n, s):
        if n == 1:
            return self.flight.pdf(s)
        if self.rayleigh:
            return self.fit(n).pdf(s)
        if isinstance(self.flight, Exponential):
            return Erlang(n, self.flight.mean).pdf(s)
        if isinstance(self.flight, Erlang):
            return Erlang(n * self.flight.shape, self.flight.stage_mean).pdf(s)
        return self._table().pdf(n, s)

    def s_cdf(self, n, x):
        if n == 0:
            return np.where(np.asarray(x, dtype=float) >= 0.0, 1.0, 0.0)
        if n == 1:
            return self.flight.cdf(x)
        if self.rayleigh:
            return self.fit(n).cdf(x)
        if isinstance(self.flight, Exponential):
            return Erlang(n, self.flight.mean).cdf(x)
        if isinstance(self.flight, Erlang):
            return Erlang(n * self.flight.shape, self.flight.stage_mean).cdf(x)
        return self._table().cdf(n, x)

    def _table(self):
        if self._conv is None:
            self._conv = _ConvolutionTable(self.flight)
        return self._conv

    # net displacement Z_n
    def z_scale(self, n):
        if self.rayleigh:
            return self.flight.sigma * math.sqrt(n)
        return math.sqrt(n * self.flight.second_moment / 2.0)

    def z_pdf(self, n, z):
        if n == 1:
            return self.flight.pdf(z)
        return Rayleigh(self.z_scale(n)).pdf(z)

    def z_cdf(self, n, z):
        if n == 1:
            return self.flight.cdf(z)
        return Rayleigh(self.z_scale(n)).cdf(z)

    def z_pdf_over_z(self, n, z):
        """f_{Z_n}(z) / z, finite at z = 0 (n >= 2)."""
        sc2 = self.z_scale(n) ** 2
        z = np.asarray(z, dtype=float)
        return np.exp(-0.5 * z * z / sc2) / sc2

    # Z_n given S_n = s (n >= 3): the unconditional law of Z_n restricted to [0, s]
    def _cond_pdf_over_z(self, n, s, z):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.z_pdf_over_z(n, z) / self.z_cdf(n, s)

    def _cond_cdf(self, n, s, z):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.z_cdf(n, z) / self.z_cdf(n, s)

    # exact two-flight joint
    def pair_integral(self, s, z, n_theta=24):
        """J(s, z) = int_{-pi/2}^{pi/2} f_R((s + z sin th)/2) f_R((s - z sin th)/2) d th."""
        x, w = legendre(n_theta)
        th = 0.25 * np.pi * (x + 1.0)
        wt = 0.25 * np.pi * w
        s = np.asarray(s, dtype=float)[..., None]
        z = np.asarray(z, dtype=float)[..., None]
        half = 0.5 * z * np.sin(th)
        return 2.0 * np.sum(self.flight.pdf(0.5 * s + half) * self.flight.pdf(0.5 * s - half) * wt, axis=-1)

    def joint_pdf(self, n, s, z, n_theta=24):
        """Joint density of (S_n, Z_n); zero outside 0 <= z < s. Requires n >= 2."""
        if n < 2:
            raise ParameterError("S_1 = Z_1 = R_1 is a line mass; use the flight density")
        s = np.asarray(s, dtype=float)
        z = np.asarray(z, dtype=float)
        inside = (z >= 0.0) & (z < s)
        if n == 2:
            with np.errstate(divide="ignore", invalid="ignore"):
                val = z * self.pair_integral(s, z, n_theta) / (np.pi * np.sqrt(np.maximum(s * s - z * z, 0.0)))
        else:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                val = self.s_pdf(n, s) * z * self._cond_pdf_over_z(n, s, z)
        return np.where(inside, np.nan_to_num(val), 0.0)

    def joint_over_z(self, n, s, z, n_theta=24):
        """f_{S_n, Z_n}(s, z) / z on 0 <= z < s (regular at z = 0)."""
        s = np.asarray(s, dtype=float)
        z = np.asarray(z, dtype=float)
        inside = (z >= 0.0) & (z < s)
        with np.errstate(divide="ignore", invalid="ignore"):
            if n == 2:
                val = self.pair_integral(s, z, n_theta) / (np.pi * np.sqrt(np.maximum(s * s - z * z, 0.0)))
            else:
                val = self.s_pdf(n, s) * self._cond_pdf_over_z(n, s, z)
        return np.where(inside, np.nan_to_num(val, posinf=0.0), 0.0)

    def z_mass_below(self, n, s, c, n_inner=24, n_theta=24):
        """int_0^{min(c, s)} f_{S_n, Z_n}(s, z) dz."""
        s = np.asarray(s, dtype=float)
        c = np.clip(np.asarray(c, dtype=float), 0.0, None)
        if n >= 3:
            with np.errstate(divide="ignore", invalid="ignore"):
                val = self.s_pdf(n, s) * self._cond_cdf(n, s, np.minimum(c, s))
            return np.nan_to_num(val)
        # z = s cos(phi): dz f = (z / pi) J(s, z) dphi
        ratio = np.clip(np.divide(c, s, out=np.ones_like(s * c), where=s > 0), 0.0, 1.0)
        phi_lo = np.arccos(ratio)
        phi, w = cos_rule(phi_lo, np.full_like(phi_lo, 0.5 * np.pi), n_inner)
        z = s[..., None] * np.cos(phi)
        return np.sum(z / np.pi * self.pair_integral(s[..., None], z, n_theta) * w, axis=-1)

    def joint_times_kernel(self, n, s, lo, hi, kernel, n_inner=24, n_theta=24):
        """int_{lo}^{hi} f_{S_n, Z_n}(s, z) kernel(z) dz with lo, hi clipped to [0, s]."""
        s = np.asarray(s, dtype=float)
        lo = np.clip(lo, 0.0, s)
        hi = np.clip(hi, lo, s)
        if n >= 3:
            z, w = cos_rule(lo, hi, n_inner)
            with np.errstate(divide="ignore", invalid="ignore"):
                dens = self.s_pdf(n, s)[..., None] * z * self._cond_pdf_over_z(n, s[..., None], z)
            return np.sum(np.nan_to_num(dens) * kernel(z) * w, axis=-1)
        safe = np.where(s > 0, s, 1.0)
        phi_hi = np.arccos(np.clip(lo / safe, 0.0, 1.0))
        phi_lo = np.arccos(np.clip(hi / safe, 0.0, 1.0))
        phi, w = cos_rule(phi_lo, phi_hi, n_inner)
        z = s[..., None] * np.cos(phi)
        return np.sum(z / np.pi * self.pair_integral(s[..., None], z, n_theta) * kernel(z) * w, axis=-1)


class WaitLaw:
    """Aggregate hover time W_n = T_0 + ... + T_n (n + 1 i.i.d. hovers)."""

    def __init__(self, hover):
        if not hover.continuous:
            raise ParameterError("hover law must have a density")
        self.hover = hover
        self._conv = None

    def _closed(self, n):
        if isinstance(self.hover, Exponential):
            return Erlang(n + 1, self.hover.mean)
        if isinstance(self.hover, Erlang):
            return Erlang((n + 1) * self.hover.shape, self.hover.stage_mean)
        return None

    def _table(self):
        if self._conv is None:
            self._conv = _ConvolutionTable(self.hover)
        return self._conv

    def pdf(self, n, w):
        if n < 0:
            raise ParameterError("W_{-1} is a point mass at 0")
        law = self._closed(n)
        if law is not None:
            return law.pdf(w)
        return self._table().pdf(n + 1, w)

    def cdf(self, n, w):
        w = np.asarray(w, dtype=float)
        if n < 0:
            return np.where(w >= 0.0, 1.0, 0.0)
        law = self._closed(n)
        if law is not None:
            return law.cdf(w)
        return np.where(w >= 0.0, self._table().cdf(n + 1, w), 0.0)


def joint_sz(law, n, s, z):
    """Joint density of total flown length S_n and net displacement Z_n."""
    return law.joint_pdf(int(n), s, z)


# --------------------------------------------------------------------------
# simple models


def sl_displacement(v, t):
    v = _positive("v", v)
    t = float(t)
    if t < 0.0:
        raise ParameterError("t must be >= 0")
    return NetDisplacementDistribution(t, v, ((v * t, 1.0),), None, {"model": "SL"})


def rs_displacement(flight, v, t):
    """L(t) = min(v t, R). ``flight=None`` means flights never end (the SL limit)."""
    if flight is None:
        return sl_displacement(v, t)
    v = _positive("v", v)
    t = float(t)
    if t < 0.0:
        raise ParameterError("t must be >= 0")
    vt = v * t
    if vt == 0.0:
        return NetDisplacementDistribution(t, v, ((0.0, 1.0),), None, {"model": "RS"})
    return NetDisplacementDistribution(
        t, v, ((vt, float(flight.sf(vt))),), _LawPart(flight, vt), {"model": "RS"}
    )


def arc_displacement(radius, v, t):
    radius = _positive("radius", radius)
    v = _positive("v", v)
    chord = 2.0 * radius * abs(math.sin(v * t / (2.0 * radius)))
    return NetDisplacementDistribution(float(t), v, ((chord, 1.0),), None, {"model": "ARC"})


# --------------------------------------------------------------------------
# RW / RWP series


@dataclass(frozen=True)
class SeriesSettings:
    """Node counts and truncation rule for the flight-count series."""

    n_grid: int = 64  # u-grid nodes for the tabulated continuous part
    n_outer: int = 24  # nodes per panel in the total-length variable
    n_inner: int = 24  # nodes per panel in the net-displacement variable
    n_wait: int = 20  # nodes per panel in the aggregate hover time
    n_theta: int = 16  # nodes for the exact two-flight joint
    tail_tol: float = 1e-4
    n_max: int = 200


def _acos_kernel(l, z, d):
    """P[|z e_0 + d e_phi| <= l] for a uniform angle phi."""
    with np.errstate(divide="ignore", invalid="ignore"):
        c = (z * z + d * d - l * l) / (2.0 * z * d)
    c = np.clip(np.nan_to_num(c, nan=1.0, posinf=1.0, neginf=-1.0), -1.0, 1.0)
    out = np.arccos(c) / np.pi
    out = np.where(z + d <= l, 1.0, out)
    return np.where(np.abs(z - d) >= l, np.where(z + d <= l, 1.0, 0.0), out)


def _series_length(law, D, settings):
    """Smallest N >= 2 with P[S_{N-1} <= D] below the tail tolerance."""
    n = 2
    while float(law.s_cdf(n - 1, D)) >= settings.tail_tol:
        n += 1
        if n > settings.n_max:
            raise NumericalError(
                f"flight series not truncated by N={settings.n_max} at v t = {D:g}",
                residual=float(law.s_cdf(settings.n_max - 1, D)),
            )
    return n


def _n2_flight_integral(law, l, D, n):
    """int_{-pi/2}^{pi/2} f_R(r) Q(D - r) d th with r = (D + l sin th)/2."""
    x, w = legendre(n)
    th = 0.5 * np.pi * x
    wt = 0.5 * np.pi * w
    l = np.asarray(l, dtype=float)[..., None]
    D = np.asarray(D, dtype=float)[..., None]
    r = 0.5 * (D + l * np.sin(th))
    return np.sum(law.f_r(r) * law.survival(D - r) * wt, axis=-1)


def _flight_pdf(law, n, l, D, st):
    """Density at l of {L <= l, in flight n} for a walk that has flown a total D (n >= 3)."""
    l = np.asarray(l, dtype=float)
    D = np.asarray(D, dtype=float)
    l, D = np.broadcast_arrays(l, D)
    valid = (l > 0.0) & (l < D)
    lv = np.where(valid, l, 0.5 * np.maximum(D, 1.0))
    Dv = np.where(valid, D, np.maximum(D, 1.0))
    total = np.zeros(l.shape)
    for lo, hi in (((Dv - lv) / 2.0, (Dv + lv) / 2.0), ((Dv + lv) / 2.0, Dv)):
        s, ws = cos_rule(lo, hi, st.n_outer)
        d = Dv[..., None] - s
        L = lv[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            c = (L * L + d * d - s * s) / (2.0 * L * d)
        wmax = np.where(s >= L + d, np.pi, np.arccos(np.clip(np.nan_to_num(c, nan=1.0), -1.0, 1.0)))
        om, wo = sqrt_end_rule(np.zeros_like(wmax), wmax, st.n_inner)
        z = np.sqrt(np.maximum(L[..., None] ** 2 + d[..., None] ** 2 - 2.0 * L[..., None] * d[..., None] * np.cos(om), 0.0))
        inner = np.sum(law.joint_over_z(n - 1, s[..., None], z, st.n_theta) * wo, axis=-1)
        total = total + np.sum(law.survival(d) * inner * ws, axis=-1)
    return np.where(valid, lv / np.pi * total, 0.0)


def _flight_cdf(law, n, l, D, st):
    """P[L <= l, in flight n] for a walk of total flown length D (n >= 2)."""
    l = np.asarray(l, dtype=float)
    D = np.asarray(D, dtype=float)
    l, D = np.broadcast_arrays(l, D)
    full = l >= D
    Dv = np.maximum(D, 1e-12)
    lv = np.clip(l, 0.0, Dv)
    if n == 2:
        x, w = legendre(st.n_outer * 2)
        th = 0.5 * np.pi * x
        wt = 0.5 * np.pi * w
        r = 0.5 * (Dv[..., None] + lv[..., None] * np.sin(th))
        jac = 0.5 * lv[..., None] * np.cos(th)
        part = np.sum(law.f_r(r) * law.survival(Dv[..., None] - r) * _acos_kernel(lv[..., None], r, Dv[..., None] - r) * jac * wt, axis=-1)
        s, ws = cos_rule(np.zeros_like(Dv), Dv, st.n_outer * 2)
        mass = np.sum(law.f_r(s) * law.survival(Dv[..., None] - s) * ws, axis=-1)
    else:
        m = n - 1
        brk = np.stack([(Dv - lv) / 2.0, np.maximum(Dv - lv, (Dv - lv) / 2.0), (Dv + lv) / 2.0, Dv], axis=-1)
        brk = np.maximum.accumulate(brk, axis=-1)
        part = np.zeros(l.shape)
        for k in range(3):
            s, ws = cos_rule(brk[..., k], brk[..., k + 1], st.n_outer)
            d = Dv[..., None] - s
            L = lv[..., None]
            inside = law.z_mass_below(m, s, L - d, st.n_inner, st.n_theta)
            lo = np.abs(L - d)
            hi = L + d
            kern = lambda z, L=L, d=d: _acos_kernel(L[..., None], z, d[..., None])
            ring = law.joint_times_kernel(m, s, lo, hi, kern, st.n_inner, st.n_theta)
            part = part + np.sum(law.survival(d) * (np.where(L > d, inside, 0.0) + ring) * ws, axis=-1)
        s, ws = cos_rule(np.zeros_like(Dv), Dv, st.n_outer * 2)
        mass = np.sum(law.s_pdf(m, s) * law.survival(Dv[..., None] - s) * ws, axis=-1)
    return np.where(D <= 0.0, 0.0, np.where(full, mass, part))


def _u_grid(n):
    """Interior Chebyshev points of [0, 1]."""
    k = np.arange(1, n + 1)
    return 0.5 * (1.0 - np.cos((2 * k - 1) * np.pi / (2 * n)))


def _tabulate(D, q_fn, cdf_fn, cont_mass_at_end, n_grid):
    u = _u_grid(n_grid)
    l = D * (1.0 - (1.0 - u) ** 2)
    q = np.array([q_fn(li, ui) for li, ui in zip(l, u)])
    cdf_inner = np.array([cdf_fn(li) for li in l])
    cdf_u = np.concatenate([[0.0], u, [1.0]])
    cdf_vals = np.concatenate([[0.0], cdf_inner, [cont_mass_at_end]])
    return _TabulatedPart(D, u, q, cdf_u, cdf_vals)


def rw_displacement(law, v, t, settings=None):
    """L(t) under the random walk: atom Q(v t) at v t plus the flight-count series."""
    st = settings or SeriesSettings()
    v = _positive("v", v)
    t = float(t)
    if t < 0.0:
        raise ParameterError("t must be >= 0")
    D = v * t
    if D == 0.0:
        return NetDisplacementDistribution(t, v, ((0.0, 1.0),), None, {"model": "RW"})
    n_max = _series_length(law, D, st)
    terms = range(2, n_max + 1)

    def q_fn(l, u):
        jac = 2.0 * D * (1.0 - u)
        # n = 2 in regularised form: jac / sqrt(D^2 - l^2) = 2 sqrt(D) / sqrt(D + l)
        q = 2.0 * math.sqrt(D) * l / (math.pi * math.sqrt(D + l)) * float(_n2_flight_integral(law, l, D, 2 * st.n_inner))
        for n in terms:
            if n >= 3:
                q += jac * float(_flight_pdf(law, n, l, D, st))
        return q

    def cdf_fn(l):
        return sum(float(_flight_cdf(law, n, l, D, st)) for n in terms)

    end_mass = sum(float(_flight_cdf(law, n, D, D, st)) for n in terms)
    part = _tabulate(D, q_fn, cdf_fn, end_mass, st.n_grid)
    atom = float(law.survival(D))
    return NetDisplacementDistribution(
        t, v, ((D, atom),), part, {"model": "RW", "n_max": n_max, "tail_tol": st.tail_tol}
    )


def _wait_diff(waits, n, x):
    """P[W_{n-2} <= x < W_{n-1}] for the waiting state after n - 1 flights."""
    return waits.cdf(n - 2, x) - waits.cdf(n - 1, x)


def rwp_displacement(law, waits, v, t, settings=None):
    """L(t) under the random waypoint model (hover before every flight, including the first)."""
    st = settings or SeriesSettings()
    v = _positive("v", v)
    t = float(t)
    if t < 0.0:
        raise ParameterError("t must be >= 0")
    D = v * t
    if D == 0.0:
        return NetDisplacementDistribution(t, v, ((0.0, 1.0),), None, {"model": "RWP"})
    n_max = _series_length(law, D, st)
    terms = range(2, n_max + 1)
    hover = waits.hover
    zero_atom = float(hover.sf(t))

    def first_flight_pdf(l):
        return float(law.survival(l) * hover.pdf(t - l / v)) / v

    def first_flight_cdf(l):
        w, ww = gl_rule(t - min(l, D) / v, t, 2 * st.n_wait)
        return float(np.sum(law.survival(D - v * w) * hover.pdf(w) * ww))

    def waiting_pdf(n, l):
        if n == 2:
            return float(law.f_r(l) * _wait_diff(waits, 2, t - l / v))
        if n == 3:
            # s = sqrt(l^2 + y^2) removes 1/sqrt(s^2 - l^2)
            y, wy = cos_rule(0.0, math.sqrt(max(D * D - l * l, 0.0)), st.n_outer)
            s = np.sqrt(l * l + y * y)
            f = l * law.pair_integral(s, np.full_like(s, l), st.n_theta) / (np.pi * s)
            return float(np.sum(f * _wait_diff(waits, 3, t - s / v) * wy))
        s, ws = cos_rule(l, D, st.n_outer)
        return float(np.sum(law.joint_pdf(n - 1, s, np.full_like(s, l)) * _wait_diff(waits, n, t - s / v) * ws))

    def waiting_cdf(n, l):
        if n == 2:
            r, wr = cos_rule(0.0, min(l, D), 2 * st.n_outer)
            return float(np.sum(law.f_r(r) * _wait_diff(waits, 2, t - r / v) * wr))
        s, ws = cos_rule(0.0, D, 2 * st.n_outer)
        return float(np.sum(law.z_mass_below(n - 1, s, np.full_like(s, l), st.n_inner, st.n_theta) * _wait_diff(waits, n, t - s / v) * ws))

    def flight_pdf(n, l):
        wmax = t - l / v
        if wmax <= 0.0:
            return 0.0
        w, ww = sqrt_end_rule(0.0, wmax, st.n_wait)
        Dw = v * (t - w)
        if n == 2:
            # 2 l / (pi sqrt(Dw^2 - l^2)) * (1/2) * int ... d th
            vals = l / (np.pi * np.sqrt(np.maximum(Dw * Dw - l * l, 1e-300))) * _n2_flight_integral(law, l, Dw, 2 * st.n_inner)
        else:
            vals = _flight_pdf(law, n, np.full_like(Dw, l), Dw, st)
        return float(np.sum(waits.pdf(n - 1, w) * vals * ww))

    def flight_cdf(n, l):
        total = 0.0
        split = min(max(t - l / v, 0.0), t)
        for lo, hi in ((0.0, split), (split, t)):
            if hi <= lo:
                continue
            w, ww = cos_rule(lo, hi, st.n_wait)
            Dw = v * (t - w)
            total += float(np.sum(waits.pdf(n - 1, w) * _flight_cdf(law, n, np.full_like(Dw, l), Dw, st) * ww))
        return total

    def pdf_total(l):
        val = first_flight_pdf(l)
        for n in terms:
            val += waiting_pdf(n, l) + flight_pdf(n, l)
        return val

    def q_fn(l, u):
        return 2.0 * D * (1.0 - u) * pdf_total(l)

    def cdf_fn(l):
        val = first_flight_cdf(l)
        for n in terms:
            val += waiting_cdf(n, l) + flight_cdf(n, l)
        return val

    part = _tabulate(D, q_fn, cdf_fn, cdf_fn(D), st.n_grid)
    return NetDisplacementDistribution(
        t, v, ((0.0, zero_atom), (D, 0.0)), part, {"model": "RWP", "n_max": n_max, "tail_tol": st.tail_tol}
    )


def displacement_for(model, t, settings=None, rng=None):
    """Analytic L(t) law for any supported mobility model."""
    from .mobility import RS, RW, RWP, SL, Arc

    if isinstance(model, SL):
        return sl_displacement(model.v, t)
    if isinstance(model, RS):
        return rs_displacement(model.flight, model.v, t)
    if isinstance(model, Arc):
        return arc_displacement(model.radius, model.v, t)
    if not isinstance(model, (RW, RWP)):
        raise ParameterError(f"unsupported model {model!r}")
    key = (model, float(t), settings or SeriesSettings(), rng)
    if key not in _SERIES:
        law = _walk_law(model.flight, rng)
        if isinstance(model, RW):
            _SERIES[key] = rw_displacement(law, model.v, t, settings)
        else:
            _SERIES[key] = rwp_displacement(law, WaitLaw(model.hover), model.v, t, settings)
    return _SERIES[key]


_LAWS = {}
_SERIES = {}


def _walk_law(flight, rng=None):
    key = (flight, rng)
    if key not in _LAWS:
        _LAWS[key] = FlightWalkLaw(flight, rng)
    return _LAWS[key]
