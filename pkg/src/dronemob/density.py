"""Intensity of the interferer point process at time t, and its Monte Carlo oracle.

Ratios ``lambda / lambda0`` do not depend on ``lambda0``; every evaluator
works with the ratio and scales at the end.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate

from .errors import ParameterError
from .quadrature import cos_rule
from .stochastic import _as_generator, _positive

__all__ = [
    "InterfererDensity",
    "RadialHistogram",
    "uim_density",
    "udm_density_general",
    "sl_density",
    "rs_density",
    "density_for",
    "intensity_measure",
    "empirical_density_oracle",
    "ring_kernel",
]

def ring_kernel(l, u_x, u0):
    """Fraction of the circle of radius ``l`` around a point at distance ``u_x``
    from the centre that lies inside the disc of radius ``u0``."""
    l, u_x = np.broadcast_arrays(np.asarray(l, dtype=float), np.asarray(u_x, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        c = (l * l + u_x * u_x - u0 * u0) / (2.0 * l * u_x)
    c = np.where((l > 0.0) & (u_x > 0.0), c, 1.0)
    out = np.arccos(np.clip(np.nan_to_num(c, nan=1.0), -1.0, 1.0)) / np.pi
    out = np.where(l + u_x <= u0, 1.0, out)
    out = np.where((l <= u_x - u0) | (l >= u_x + u0), np.where(l + u_x <= u0, 1.0, 0.0), out)
    # circle through the boundary point seen from the centre: right limit in u_x
    return np.where((u_x == 0.0) & (l == u0) & (u0 > 0.0), 0.5, out)


@dataclass(frozen=True)
class InterfererDensity:
    """Radial intensity ``lambda(u_x)`` (per m^2) of the interferers around the UE's zenith.

    ``outer`` is the radius beyond which the intensity equals ``lam0``;
    ``breaks`` lists radii where the profile has kinks.
    """

    service: str
    lam0: float
    u0: float
    t: float
    ratio_fn: object = field(repr=False)
    outer: float = 0.0
    breaks: tuple = ()
    displacement: object = field(default=None, repr=False)
    model: str = ""

    def raw_ratio(self, u_x):
        """``lambda / lambda0`` before clipping to [0, 1]; exposes quadrature round-off."""
        u_x = np.asarray(u_x, dtype=float)
        if np.any(u_x < 0.0):
            raise ParameterError("u_x must be >= 0")
        return np.where(u_x >= self.outer, 1.0, self.ratio_fn(np.minimum(u_x, self.outer)))

    def ratio(self, u_x):
        return np.clip(self.raw_ratio(u_x), 0.0, 1.0)

    def __call__(self, u_x):
        return self.lam0 * self.ratio(u_x)


def uim_density(lam0, u0_t):
    """Homogeneous intensity outside the disc of radius ``u0_t``, zero inside."""
    lam0 = _positive("lambda0", lam0)
    u0_t = float(u0_t)
    if u0_t < 0.0:
        raise ParameterError("u0_t must be >= 0")
    return InterfererDensity(
        "UIM", lam0, u0_t, 0.0, lambda u: np.where(u > u0_t, 1.0, 0.0) if u0_t > 0.0 else np.ones_like(u),
        outer=math.nextafter(u0_t, math.inf) if u0_t > 0.0 else 0.0,
        breaks=(u0_t,), model="any",
    )


def _region3_gate(t, u0, v):
    # right-continuous in t
    return 1.0 if v * t >= u0 else 0.0


def udm_density_general(lam0, u0, t, disp):
    """UE-dependent service: intensity built from any net-displacement law ``disp`` at time ``t``."""
    lam0 = _positive("lambda0", lam0)
    u0 = float(u0)
    t = float(t)
    if u0 < 0.0 or t < 0.0:
        raise ParameterError("u0 and t must be >= 0")
    if abs(disp.t - t) > 1e-9 * max(1.0, t):
        raise ParameterError(f"displacement law is for t={disp.t}, not t={t}")
    vt = disp.vt
    for loc, m in disp.atoms:
        if loc > vt * (1 + 1e-12) + 1e-12 and m > 0:
            raise ParameterError("displacement law has mass beyond v t")
    if u0 == 0.0:
        return InterfererDensity("UDM", lam0, u0, t, lambda u: np.ones_like(u), outer=0.0, displacement=disp)
    gate = _region3_gate(t, u0, disp.v)
    cont = disp.continuous
    # rescale the continuous part so the law carries unit mass; otherwise the
    # quadrature deficit shows up as a jump at |u0 - vt|
    atom_total = sum(m for _, m in disp.atoms)
    if abs(disp.total_mass - 1.0) > 1e-2:
        raise ParameterError(f"displacement law has total mass {disp.total_mass:.6g}")
    end = float(cont.cdf(vt)) if cont is not None else 0.0
    scale = (1.0 - atom_total) / end if end > 0.0 else 0.0
    # the integral term runs on the tabulated pdf, whose mass differs slightly from the cdf's end value
    qmass = disp.continuous_mass
    qscale = (1.0 - atom_total) / qmass if qmass > 0.0 else 0.0

    def ratio(u):
        u = np.asarray(u, dtype=float)
        covered = np.zeros_like(u)
        for loc, m in disp.atoms:
            if m:
                covered = covered + m * ring_kernel(loc, u, u0)
        if cont is not None:
            covered = covered + scale * np.where(u < u0, cont.cdf(u0 - u), 0.0)
            lo = np.abs(u - u0)
            hi = np.minimum(vt, u + u0)
            part = cont.integrate(lambda l: ring_kernel(l, u[..., None], u0), lo, np.maximum(hi, lo))
            covered = covered + qscale * np.where(hi > lo, part, 0.0)
        beta = 1.0 - covered
        return np.where(u < abs(u0 - vt), beta * gate, beta)

    # every atom at distance l bends the profile at |u0 - l| and u0 + l (a hover atom at 0 is a jump at u0)
    kinks = {abs(u0 - vt), u0 + vt} | {r for loc, m in disp.atoms if m for r in (abs(u0 - loc), u0 + loc)}
    kinks = {r for r in kinks if 0.0 < r <= u0 + vt}
    return InterfererDensity(
        "UDM", lam0, u0, t, ratio, outer=u0 + vt, breaks=tuple(sorted(kinks)),
        displacement=disp, model=disp.meta.get("model", ""),
    )


def sl_density(lam0, u0, v, t):
    """Closed-form profile for straight-line interferers."""
    lam0 = _positive("lambda0", lam0)
    v = _positive("v", v)
    u0, t = float(u0), float(t)
    if u0 < 0.0 or t < 0.0:
        raise ParameterError("u0 and t must be >= 0")
    vt = v * t
    gate = _region3_gate(t, u0, v)

    def ratio(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            c = (u0 * u0 - u * u - vt * vt) / (2.0 * u * vt)
        mid = np.arccos(np.clip(np.nan_to_num(c, nan=0.0), -1.0, 1.0)) / np.pi
        return np.where(u < abs(u0 - vt), gate, mid)

    if vt == 0.0:
        return uim_density(lam0, u0)
    if u0 == 0.0:
        return InterfererDensity("UDM", lam0, u0, t, lambda u: np.ones_like(u), outer=0.0, model="SL")
    return InterfererDensity("UDM", lam0, u0, t, ratio, outer=u0 + vt, breaks=tuple(sorted({abs(u0 - vt), u0 + vt})), model="SL")


def rs_density(lam0, u0, v, t, flight, nodes=64):
    """Random-stop profile, one quadrature in the stop distance. ``flight=None`` means flights never end."""
    lam0 = _positive("lambda0", lam0)
    v = _positive("v", v)
    u0, t = float(u0), float(t)
    if u0 < 0.0 or t < 0.0:
        raise ParameterError("u0 and t must be >= 0")
    vt = v * t
    gate = _region3_gate(t, u0, v)
    F = (lambda x: np.zeros_like(np.asarray(x, dtype=float))) if flight is None else flight.cdf
    f = (lambda x: np.zeros_like(np.asarray(x, dtype=float))) if flight is None else flight.pdf

    def outside(l, u):
        # fraction of the circle of radius l around u lying outside the disc u0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            c = (u0 * u0 - u * u - l * l) / (2.0 * u * l)
        c = np.where(u > 0.0, c, np.where(l < u0, 1.0, -1.0))
        c = np.where(l >= u + u0, -1.0, np.where(l + u <= u0, 1.0, c))
        # u = 0 with v t = u0: the right limit in u is half the circle
        c = np.where((u == 0.0) & (l == u0) & (vt == u0), 0.0, c)
        return np.arccos(np.clip(np.nan_to_num(c, nan=1.0), -1.0, 1.0)) / np.pi

    def ratio(u):
        u = np.asarray(u, dtype=float)
        r = np.minimum(vt, u + u0)
        lo = np.abs(u - u0)
        beta = F(u - u0) * (u > u0) + (1.0 - F(r)) * outside(r, u)
        if flight is not None:
            hi = np.maximum(r, lo)
            x, w = cos_rule(lo, hi, nodes)
            beta = beta + np.where(r > lo, np.sum(f(x) * outside(x, u[..., None]) * w, axis=-1), 0.0)
        return np.where(u < abs(u0 - vt), beta * gate, beta)

    if vt == 0.0:
        return uim_density(lam0, u0)
    if u0 == 0.0:
        return InterfererDensity("UDM", lam0, u0, t, lambda u: np.ones_like(u), outer=0.0, model="RS")
    return InterfererDensity("UDM", lam0, u0, t, ratio, outer=u0 + vt, breaks=tuple(sorted({abs(u0 - vt), u0 + vt})), model="RS")


def density_for(model, lam0, u0, t, service="UDM", settings=None):
    """Interferer intensity for ``model`` under the given service model."""
    from .displacement import displacement_for
    from .mobility import RS, SL

    if service == "UIM":
        return uim_density(lam0, u0)
    if service != "UDM":
        raise ParameterError(f"unknown service model {service!r}")
    if t == 0.0:
        # every model starts from the same exclusion-zone profile
        return uim_density(lam0, u0)
    if isinstance(model, SL):
        return sl_density(lam0, u0, model.v, t)
    if isinstance(model, RS):
        return rs_density(lam0, u0, model.v, t, model.flight)
    return udm_density_general(lam0, u0, t, displacement_for(model, t, settings))


def intensity_measure(density, radius, epsrel=1e-6):
    """Expected number of interferers within ``radius`` of the UE's zenith."""
    radius = _positive("radius", radius)
    pts = sorted(b for b in density.breaks if 0.0 < b < radius)
    inner = min(radius, density.outer)
    total = 0.0
    if inner > 0.0:
        val, _ = integrate.quad(
            lambda u: 2.0 * math.pi * u * float(density.ratio(u)), 0.0, inner,
            points=[p for p in pts if p < inner] or None, epsrel=epsrel, epsabs=0.0, limit=400,
        )
        total += val
    if radius > inner:
        total += math.pi * (radius * radius - inner * inner)
    return density.lam0 * total


@dataclass
class RadialHistogram:
    """Estimated ``lambda / lambda0`` on radial bins, with its standard error."""

    edges: np.ndarray
    ratio: np.ndarray
    stderr: np.ndarray
    realizations: int
    points: int

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def empirical_density_oracle(model, lam0, u0, t, bins, rng, realizations=20000, r_max=None, backend=None):
    """Monte Carlo estimate of the interferer intensity ratio around the UE's zenith.

    Only drones that start inside the exclusion disc of radius ``u0`` are
    simulated: their displaced positions carry the deficit
    ``lambda0 - lambda(t; u_x)``. Realizations are independent PPP draws;
    since the pooled points of independent PPP draws are again i.i.d.
    given their count, they are displaced as one batch.
    """
    from .mobility import displacements

    lam0 = _positive("lambda0", lam0)
    u0 = float(u0)
    t = float(t)
    realizations = int(realizations)
    if realizations < 1:
        raise ParameterError("need at least one realization")
    gen = _as_generator(rng)
    r_max = float(r_max) if r_max is not None else u0 + model.v * t
    if isinstance(bins, int):
        edges = np.linspace(0.0, r_max, bins + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    counts = np.zeros(edges.size - 1)
    total_points = 0
    chunk = 2000
    for start in range(0, realizations, chunk):
        k = min(chunk, realizations - start)
        n_pts = int(gen.poisson(lam0 * math.pi * u0 * u0 * k)) if u0 > 0.0 else 0
        if n_pts == 0:
            continue
        pts = sample_ppp_points(n_pts, u0, gen)
        if t > 0.0:
            pts = pts + displacements(model, [t], n_pts, gen, backend=backend)[:, 0, :]
        counts += np.histogram(np.hypot(pts[:, 0], pts[:, 1]), bins=edges)[0]
        total_points += n_pts
    area = math.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    deficit = counts / (realizations * area * lam0)
    stderr = np.sqrt(counts) / (realizations * area * lam0)
    return RadialHistogram(edges, 1.0 - deficit, stderr, realizations, total_points)


def sample_ppp_points(count, radius, gen):
    """``count`` i.i.d. uniform points on the disc of radius ``radius``."""
    r = radius * np.sqrt(gen.random(count))
    phi = gen.uniform(0.0, 2.0 * math.pi, count)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def bin_average(density, edges, nodes=32):
    """Area-weighted mean of ``lambda / lambda0`` over each annulus."""
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    out = np.empty(lo.size)
    kinks = np.asarray(sorted(density.breaks), dtype=float)
    for i, (a, b) in enumerate(zip(lo, hi)):
        cuts = np.concatenate([[a], kinks[(kinks > a) & (kinks < b)], [b]])
        acc = 0.0
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            x, w = cos_rule(c0, c1, nodes)
            acc += float(np.sum(2.0 * math.pi * x * density.ratio(x) * w))
        out[i] = acc / (math.pi * (b * b - a * a))
    return out
