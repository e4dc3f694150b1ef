"""Cross-checks of the analytic laws against Monte Carlo oracles and known identities.

Each ``check_*`` function returns a list of :class:`Check` rows; the
numbered groups are what ``dronemob validate-all`` reports.
"""

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy import optimize

from .density import bin_average, density_for, empirical_density_oracle, intensity_measure, uim_density
from .displacement import displacement_for
from .mobility import RW, RWP, SL, sample_net_displacement, walk_after_flights
from .rate import ChannelParams, RateQuery, average_rate, interference_exponent, session_rate
from .simulator import SimConfig, chi_square_uniformity, dispersion_check, ks_statistic, run_simulation
from .stochastic import Exponential, Rayleigh, Rng

__all__ = ["Check", "CHECKS", "run_checks"]

# stream ids keep every oracle on its own random stream
_S_DISP, _S_DENS, _S_CLOSURE, _S_DISPERSION, _S_RATE = 301, 302, 303, 304, 305


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    case: str
    statistic: float
    threshold: float
    passed: bool


def _models(cfg, allowed=None):
    names = [n for n in cfg.models if allowed is None or n in allowed]
    return [(n, cfg.model(n)) for n in names]


def _ks_against(dist, samples):
    return ks_statistic(samples, dist.cdf, dist.cdf_left, atoms=[a for a, _ in dist.atoms])


def check_displacement(cfg):
    """Analytic L(t) against simulated trajectories (KS <= 0.02)."""
    out = []
    for mi, (name, model) in enumerate(_models(cfg, ("RW", "RWP"))):
        for ti, t in enumerate(cfg.validate.displacement_times):
            dist = displacement_for(model, t)
            samples = sample_net_displacement(model, t, cfg.mc.samples, Rng(cfg.seed, _S_DISP, (mi, ti)))
            ks = _ks_against(dist, samples)
            out.append(Check(1, "displacement-ks", f"{name} t={t:g}", ks, 0.02, ks <= 0.02))
    return out


def rayleigh_fit_ks(dist, grid=4001):
    """Sup distance between ``dist`` and its closest Rayleigh law, and that law's scale."""
    l = np.linspace(0.0, dist.vt, grid)
    right, left = dist.cdf(l), dist.cdf_left(l)

    def gap(sigma):
        ray = -np.expm1(-0.5 * (l / sigma) ** 2)
        return float(max(np.max(np.abs(right - ray)), np.max(np.abs(left - ray))))

    sigma_ml = math.sqrt(0.5 * dist.moment(2))
    res = optimize.minimize_scalar(gap, bounds=(0.5 * sigma_ml, 1.5 * sigma_ml), method="bounded",
                                   options={"xatol": 1e-6 * sigma_ml})
    best = min((gap(sigma_ml), sigma_ml), (res.fun, float(res.x)))
    return best


def check_asymptotic(cfg):
    """RW L(t) at a long horizon is close to a Rayleigh law (KS <= 0.03)."""
    t = cfg.validate.asymptotic_time
    model = cfg.model("RW")
    ks, sigma = rayleigh_fit_ks(displacement_for(model, t))
    return [Check(2, "rayleigh-asymptotic", f"RW t={t:g} sigma={sigma:.6g}", ks, 0.03, ks <= 0.03)]


def check_density(cfg):
    """Analytic density ratio against the exclusion-zone oracle, sup over bins <= 0.03."""
    out = []
    u0 = cfg.validate.density_u0
    for mi, (name, model) in enumerate(_models(cfg, ("SL", "RS", "RW", "RWP", "ARC"))):
        for ti, t in enumerate(cfg.validate.density_times):
            edges = np.linspace(0.0, u0 + model.v * t, cfg.mc.bins + 1)
            ana = bin_average(density_for(model, 1.0, u0, t), edges)
            mc = empirical_density_oracle(model, cfg.mc.lam0, u0, t, edges, Rng(cfg.seed, _S_DENS, (mi, ti)),
                                          realizations=cfg.mc.realizations)
            sup = float(np.max(np.abs(ana - mc.ratio)))
            out.append(Check(3, "density-sup", f"{name} u0={u0:g} t={t:g}", sup, 0.03, sup <= 0.03))
    return out


def check_closures(cfg):
    """Rayleigh closure of Z_5, uniform bearings Psi_5, Poisson counts after displacement."""
    out = []
    n = cfg.validate.closure_samples
    sigma = cfg.flight.mean / math.sqrt(math.pi / 2.0)
    _, z, _ = walk_after_flights(Rayleigh(sigma), 5, n, Rng(cfg.seed, _S_CLOSURE, (0,)))
    target = Rayleigh(sigma * math.sqrt(5.0))
    ks = ks_statistic(z, target.cdf)
    out.append(Check(4, "z5-rayleigh-ks", f"sigma={sigma:.6g}", ks, 0.01, ks <= 0.01))
    for k, (label, law) in enumerate((("rayleigh", Rayleigh(sigma)), ("exponential", Exponential(cfg.flight.mean)))):
        _, _, psi = walk_after_flights(law, 5, n, Rng(cfg.seed, _S_CLOSURE, (1 + k,)))
        p = chi_square_uniformity(psi, 36)
        out.append(Check(4, "psi5-uniform-p", f"{label} flights", p, 0.01, p > 0.01))
    mc = cfg.mc
    for mi, (name, model) in enumerate(_models(cfg, ("SL", "RS", "RW", "RWP", "ARC"))):
        res = dispersion_check(model, mc.dispersion_lam0, mc.dispersion_radius, mc.dispersion_time,
                               seed=(cfg.seed + 7919 * (mi + 1)) % 2**64, realizations=mc.dispersion_realizations)
        worst = float(np.max(np.abs(res.dispersion - 1.0)))
        out.append(Check(4, "dispersion", f"{name} t={mc.dispersion_time:g} max|var/mean-1|", worst, 0.1, worst <= 0.1))
    return out


def check_interferer_count(cfg):
    """Expected interferers in b(u0 + vt): straight-line motion gives the largest count."""
    out = []
    for u0 in cfg.validate.count_u0:
        for t in cfg.validate.count_times:
            ref_model = SL(cfg.speed)
            radius = u0 + ref_model.v * t
            ref = intensity_measure(density_for(ref_model, cfg.lam0, u0, t), radius)
            for name, model in _models(cfg, ("RS", "RW", "RWP", "ARC")):
                lam = intensity_measure(density_for(model, cfg.lam0, u0, t), radius)
                slack = (lam - ref) / ref  # must not exceed 1e-3
                out.append(Check(5, "sl-maximal", f"{name} u0={u0:g} t={t:g}", slack, 1e-3, slack <= 1e-3))
    return out


def boundary_jump(density, b, h=1e-8):
    """Jump of the density ratio across radius ``b``.

    The profiles have square-root cusps at their region boundaries, so the
    two-sided gap at offset ``h b`` is extrapolated to zero offset assuming
    gap(h) = jump + c sqrt(h).
    """
    def gap(e):
        return abs(float(density.raw_ratio(b * (1.0 + e))) - float(density.raw_ratio(b * (1.0 - e))))

    g1, g2 = gap(h), gap(1e-2 * h)
    return abs(g2 - 0.1 * g1) / 0.9


def check_boundaries(cfg):
    """Continuity at |u0 +- vt|, homogeneity as u0 -> 0, and the t -> 0 limit."""
    out = []
    for name, model in _models(cfg, ("SL", "RS", "RW", "RWP", "ARC")):
        worst = 0.0
        for u0 in cfg.validate.boundary_u0:
            for t in cfg.validate.density_times:
                d = density_for(model, 1.0, u0, t)
                for b in {abs(u0 - model.v * t), u0 + model.v * t}:
                    if b > 0.0:
                        worst = max(worst, boundary_jump(d, b))
        out.append(Check(6, "continuity", f"{name}", worst, 1e-6, worst <= 1e-6))
        t_mid = cfg.validate.density_times[0]
        tiny = 1e-3
        d = density_for(model, 1.0, tiny, t_mid)
        # drones still parked at their start keep a hole of radius u0, so look outside it
        u = np.linspace(tiny, 5.0, 501)[1:]
        dev = float(np.max(np.abs(d.ratio(u) - 1.0)))
        out.append(Check(6, "small-u0-homogeneous", f"{name} u0=1e-3 t={t_mid:g}", dev, 1e-3, dev <= 1e-3))
        u0 = cfg.validate.density_u0
        t0 = 1e-6
        d = density_for(model, 1.0, u0, t0)
        ref = uim_density(1.0, u0)
        # outside the transition layer |u - u0| <= v t, whose width vanishes with t
        u = np.concatenate([np.linspace(0.0, 2.0 * u0, 2001), [u0 - 1e-3, u0 + 1e-3]])
        u = u[np.abs(u - u0) > model.v * t0]
        dev = float(np.max(np.abs(d.ratio(u) - ref.ratio(u))))
        out.append(Check(6, "t-to-0-matches-uim", f"{name} u0={u0:g} t=1e-6", dev, 1e-4, dev <= 1e-4))
    return out


def _query(cfg, model, t, h=None, m=None):
    ch = cfg.channel
    channel = ChannelParams(h=ch.h if h is None else h, alpha=ch.alpha, m0=ch.m0 if m is None else m,
                            mx=ch.mx if m is None else m, P=ch.P)
    return RateQuery("UDM", model, cfg.lam0, channel, t)


def check_rate_mc(cfg):
    """Analytic R(t) for straight-line interferers against simulated SIR (5% relative)."""
    mc = cfg.mc
    if mc.rate_realizations < 1:
        return []
    model = SL(cfg.speed)
    times = cfg.validate.rate_times
    sim = run_simulation(SimConfig(lam0=cfg.lam0, model=model, times=times, seed=cfg.seed, service="UDM",
                                   channel=cfg.channel, realizations=mc.rate_realizations,
                                   fades_per_step=mc.fades_per_step, tail_fraction=mc.tail_fraction))
    out = []
    for j, t in enumerate(times):
        ana = average_rate(_query(cfg, model, t)).value
        rel = abs(sim.rate[j] - ana) / ana
        out.append(Check(7, "rate-vs-mc", f"SL t={t:g} mc={sim.rate[j]:.5g}+-{sim.rate_stderr[j]:.2g}", rel, 0.05, rel <= 0.05))
    return out


def check_trends(cfg):
    """Ordering of rates in fading, height and mobility model."""
    out = []
    times = cfg.validate.rate_times
    h = cfg.channel.h
    for name, model in _models(cfg, ("SL", "RS", "RW", "RWP", "ARC")):
        for t in times:
            base = average_rate(_query(cfg, model, t, m=1)).value
            m2 = average_rate(_query(cfg, model, t, m=2)).value
            high = average_rate(_query(cfg, model, t, h=2.0 * h, m=1)).value
            out.append(Check(8, "m2-above-m1", f"{name} t={t:g}", m2 - base, 0.0, m2 >= base))
            out.append(Check(8, "h-below-2h", f"{name} t={t:g} h={h:g}", base - high, 0.0, base >= high))
    sl = SL(cfg.speed)
    T = cfg.validate.session_horizon
    sl_sr = session_rate(_query(cfg, sl, 0.0, m=1), T).value
    for name, model in _models(cfg, ("RS", "RW", "RWP", "ARC")):
        for t in times:
            diff = average_rate(_query(cfg, model, t, m=1)).value - average_rate(_query(cfg, sl, t, m=1)).value
            # equal at t = 0 where every model starts from the same profile
            out.append(Check(8, "sl-rate-lowest", f"{name} t={t:g}", diff, 0.0, diff >= -1e-9))
        sr = session_rate(_query(cfg, model, 0.0, m=1), T).value
        out.append(Check(8, "sl-session-lowest", f"{name} T={T:g}", sr - sl_sr, 0.0, sr >= sl_sr))
    return out


def check_normalization(cfg):
    """Total mass of every L(t) law, range of every density, derivatives of the interference exponent."""
    out = []
    v = cfg.validate
    times = sorted(set(v.displacement_times) | set(v.density_times) | {t for t in v.count_times})
    for name, model in _models(cfg):
        worst_mass = 0.0
        worst_range = 0.0
        for t in times:
            if t <= 0.0:
                continue
            dist = displacement_for(model, t)
            worst_mass = max(worst_mass, abs(dist.total_mass - 1.0))
            for u0 in v.count_u0:
                d = density_for(model, cfg.lam0, u0, t)
                u = np.linspace(0.0, u0 + model.v * t * 1.05, 1201)
                vals = d(u)
                if np.any(vals < 0.0) or np.any(vals > cfg.lam0):
                    worst_range = math.inf
                raw = d.raw_ratio(u)
                worst_range = max(worst_range, float(np.max(-raw)), float(np.max(raw - 1.0)))
        out.append(Check(9, "displacement-mass", name, worst_mass, 1e-3, worst_mass <= 1e-3))
        out.append(Check(9, "density-range", f"{name} max excursion of unclipped ratio", worst_range, 1e-3,
                         worst_range <= 1e-3))
    worst = 0.0
    s_grid = np.array([1e4, 1e5, 1e6, 1e7]) * cfg.channel.h ** cfg.channel.alpha / 1e6
    for name, model in _models(cfg, ("SL", "RW")):
        d = density_for(model, cfg.lam0, v.density_u0, v.density_times[0])
        for mx in (1, 2, 3):
            ch = replace(cfg.channel, mx=mx, m0=mx)
            for s in s_grid:
                g = interference_exponent(np.array(s), d, ch, 3)
                for j in (1, 2, 3):
                    hs = 1e-3 * s
                    hi = interference_exponent(np.array(s + hs), d, ch, j - 1)[j - 1]
                    lo = interference_exponent(np.array(s - hs), d, ch, j - 1)[j - 1]
                    fd = (hi - lo) / (2.0 * hs)
                    tol = max(1e-6, 1e-4 * abs(float(g[j])))
                    worst = max(worst, abs(float(fd) - float(g[j])) / tol)
    out.append(Check(9, "laplace-derivatives", "max |fd - g^(j)| / max(1e-6, 1e-4 |g^(j)|)", worst, 1.0, worst <= 1.0))
    return out


CHECKS = {
    1: check_displacement,
    2: check_asymptotic,
    3: check_density,
    4: check_closures,
    5: check_interferer_count,
    6: check_boundaries,
    7: check_rate_mc,
    8: check_trends,
    9: check_normalization,
}


def run_checks(cfg, groups=None):
    rows = []
    for key in sorted(CHECKS) if groups is None else groups:
        rows.extend(CHECKS[key](cfg))
    return rows
