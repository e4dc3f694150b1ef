"""Monte Carlo network simulator and the goodness-of-fit statistics used to check the analytics."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import os

import numpy as np
from scipy import stats as sps

from .errors import ConfigError, NumericalError, ParameterError
from .mobility import MobilityModel, displacements
from .rate import ChannelParams
from .stochastic import Disc, Rng, sample_gamma_fading, sample_ppp

__all__ = [
    "SimConfig",
    "NetworkRealization",
    "EmpiricalSummary",
    "window_for_tail",
    "realize_network",
    "run_simulation",
    "ks_statistic",
    "chi_square_uniformity",
    "dispersion_check",
    "DispersionResult",
    "worker_count",
]

_SIM_STREAM = 101
_DISPERSION_STREAM = 102
_MIN_U0 = 1e-9


def worker_count():
    """Worker threads for realization-parallel loops (``DRONEMOB_THREADS``, default 1)."""
    raw = os.environ.get("DRONEMOB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"DRONEMOB_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def window_for_tail(channel, fraction=1e-3):
    """Radius beyond which the mean interference of a homogeneous field is ``fraction`` of its total.

    For intensity lambda0 the mean interference from beyond radius rho is
    proportional to (rho^2 + h^2)^(1 - alpha/2), so the ratio to the total
    is ((rho^2 + h^2) / h^2)^(1 - alpha/2).
    """
    if not 0.0 < fraction < 1.0:
        raise ParameterError("tail fraction must lie in (0, 1)")
    h, alpha = channel.h, channel.alpha
    return h * math.sqrt(fraction ** (-2.0 / (alpha - 2.0)) - 1.0)


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo experiment.

    ``obs_radius`` bounds the interference sum around the UE's zenith and
    ``window_radius`` the initial PPP sample; the latter must cover the
    former plus the distance a drone can fly by ``horizon``. Either may be
    left ``None`` to pick it from the tail bound (``tail_fraction``).
    """

    lam0: float
    model: MobilityModel
    times: tuple
    seed: int
    service: str = "UDM"
    channel: ChannelParams = field(default_factory=ChannelParams)
    realizations: int = 1000
    horizon: float = None
    obs_radius: float = None
    window_radius: float = None
    tail_fraction: float = 1e-3
    tail_correction: bool = True
    fades_per_step: int = 1
    hist_radius: float = None
    hist_bins: int = 50
    keep_displacements: int = 20000

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        lam0 = float(self.lam0)
        if not math.isfinite(lam0) or lam0 <= 0.0:
            raise ConfigError("lam0 must be finite and > 0")
        set_("lam0", lam0)
        if not isinstance(self.model, MobilityModel):
            raise ConfigError("model must be a mobility model")
        if self.service not in ("UIM", "UDM"):
            raise ConfigError(f"service must be UIM or UDM, got {self.service!r}")
        times = tuple(float(t) for t in self.times)
        if not times:
            raise ConfigError("time grid is empty")
        if any(not math.isfinite(t) or t < 0.0 for t in times):
            raise ConfigError("times must be finite and >= 0")
        set_("times", times)
        if int(self.realizations) < 1:
            raise ConfigError("realizations must be >= 1")
        set_("realizations", int(self.realizations))
        if int(self.fades_per_step) < 1:
            raise ConfigError("fades_per_step must be >= 1")
        horizon = max(times) if self.horizon is None else float(self.horizon)
        if horizon < max(times):
            raise ConfigError("horizon must cover the time grid")
        set_("horizon", horizon)
        obs = window_for_tail(self.channel, self.tail_fraction) if self.obs_radius is None else float(self.obs_radius)
        if not obs > 0.0:
            raise ConfigError("obs_radius must be > 0")
        set_("obs_radius", obs)
        need = obs + self.model.v * horizon
        window = need if self.window_radius is None else float(self.window_radius)
        if window < need * (1.0 - 1e-12):
            raise ConfigError(
                f"window radius {window:g} m is smaller than obs_radius + v*horizon = {need:g} m"
            )
        set_("window_radius", window)
        if self.hist_radius is None:
            set_("hist_radius", min(obs, 2.0 / math.sqrt(lam0) + self.model.v * horizon))
        if int(self.hist_bins) < 1:
            raise ConfigError("hist_bins must be >= 1")


@dataclass
class NetworkRealization:
    """One drawn network: initial drone positions, the serving drone and positions on the time grid."""

    initial: np.ndarray  # (N, 2)
    serving: int  # index of the drone nearest to the UE's zenith at t = 0, -1 if none
    positions: np.ndarray  # (N, T, 2), serving row per the service model

    @property
    def u0(self):
        return float(np.hypot(*self.initial[self.serving])) if self.serving >= 0 else math.nan


def realize_network(cfg, index):
    """Draw realization ``index`` of ``cfg`` (positions only, no fading)."""
    gen = Rng(cfg.seed, _SIM_STREAM, (int(index),)).generator()
    pts = sample_ppp(cfg.lam0, Disc((0.0, 0.0), cfg.window_radius), gen).points
    n = len(pts)
    times = np.asarray(cfg.times)
    if n == 0:
        return NetworkRealization(pts, -1, np.empty((0, times.size, 2))), gen
    dist = np.hypot(pts[:, 0], pts[:, 1])
    k = int(np.argmin(dist))
    if dist[k] < _MIN_U0:
        # a drone exactly above the UE: nudge it off the axis
        pts[k] = (_MIN_U0, 0.0)
        dist[k] = _MIN_U0
    moves = displacements(cfg.model, times, n, gen) if np.any(times > 0.0) else np.zeros((n, times.size, 2))
    positions = pts[:, None, :] + moves
    if cfg.service == "UDM":
        frac = np.maximum(1.0 - cfg.model.v * times / dist[k], 0.0)
        positions[k] = pts[k][None, :] * frac[:, None]
    return NetworkRealization(pts, k, positions), gen


@dataclass
class EmpiricalSummary:
    """Aggregated output of :func:`run_simulation`.

    ``sir`` holds one row per kept realization (``fades_per_step`` columns
    per time step, stacked along the last axis). ``hist_ratio`` is the mean
    interferer count per annulus divided by ``lam0`` times its area.
    """

    times: np.ndarray
    sir: np.ndarray  # (R_kept, T, F)
    rate: np.ndarray  # (T,)
    rate_stderr: np.ndarray  # (T,)
    excluded: int
    realizations: int
    hist_edges: np.ndarray
    hist_ratio: np.ndarray  # (T, bins)
    displacement_samples: list  # per time step, net displacements of interferers
    stats: dict
    window_radius: float
    obs_radius: float


def _tail_interference(cfg):
    ch = cfg.channel
    rho2 = cfg.obs_radius**2 + ch.h**2
    return 2.0 * math.pi * cfg.lam0 * rho2 ** (1.0 - 0.5 * ch.alpha) / (ch.alpha - 2.0)


def _path_gain(r2, alpha):
    """r^(-alpha) from r^2, with cheap paths for the common integer exponents."""
    if alpha == 3.0:
        return 1.0 / (r2 * np.sqrt(r2))
    if alpha == 4.0:
        return 1.0 / (r2 * r2)
    return r2 ** (-0.5 * alpha)


def _one_realization(cfg, index):
    net, gen = realize_network(cfg, index)
    T = len(cfg.times)
    F = cfg.fades_per_step
    ch = cfg.channel
    edges = np.linspace(0.0, cfg.hist_radius, cfg.hist_bins + 1)
    if net.serving < 0:
        return None
    pos = net.positions
    horiz = np.hypot(pos[..., 0], pos[..., 1])  # (N, T)
    n = horiz.shape[0]
    others = np.ones(n, dtype=bool)
    sir = np.empty((T, F))
    counts = np.zeros((T, edges.size - 1))
    disp = []
    tail = _tail_interference(cfg) if cfg.tail_correction else 0.0
    h2 = ch.h * ch.h
    for j in range(T):
        d = horiz[:, j]
        if cfg.service == "UDM":
            serving = net.serving
            rest = others.copy()
            rest[serving] = False
            if np.any(d[rest] < d[serving] - 1e-9 * max(1.0, d[serving])):
                raise NumericalError(
                    f"realization {index}: an interferer is nearer than the serving drone at t={cfg.times[j]:g}"
                )
        else:
            inside = np.flatnonzero(d <= cfg.obs_radius)
            if inside.size == 0:
                return None
            serving = int(inside[np.argmin(d[inside])])
            rest = others.copy()
            rest[serving] = False
        rest &= d <= cfg.obs_radius
        if not np.any(rest):
            return None
        dx = d[rest]
        counts[j] = np.histogram(dx, bins=edges)[0]
        if cfg.keep_displacements:
            idx = np.flatnonzero(rest)[: cfg.keep_displacements]
            moved = pos[idx, j, :] - net.initial[idx]
            disp.append(np.hypot(moved[:, 0], moved[:, 1]))
        path = _path_gain(dx * dx + h2, ch.alpha)
        r0 = float(_path_gain(np.array([d[serving] ** 2 + h2]), ch.alpha)[0])
        g0 = sample_gamma_fading(ch.m0, gen, F)
        gx = sample_gamma_fading(ch.mx, gen, (F, dx.size))
        interference = gx @ path + tail
        sir[j] = g0 * r0 / interference
    return sir, counts, disp, net.u0


def run_simulation(cfg, workers=None):
    """Simulate ``cfg.realizations`` independent networks and aggregate SIR, rate and density statistics.

    Output is a deterministic function of ``cfg`` and does not depend on
    ``workers``: realizations use their own random streams and are
    reduced in index order.
    """
    workers = worker_count() if workers is None else max(1, int(workers))
    T = len(cfg.times)
    indices = range(cfg.realizations)
    if workers == 1:
        results = [_one_realization(cfg, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: _one_realization(cfg, i), indices))
    kept = [r for r in results if r is not None]
    excluded = len(results) - len(kept)
    edges = np.linspace(0.0, cfg.hist_radius, cfg.hist_bins + 1)
    area = math.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    if kept:
        sir = np.stack([r[0] for r in kept])
        counts = np.sum([r[1] for r in kept], axis=0)
        per_real = np.log1p(sir).mean(axis=2)  # (R, T)
        rate = per_real.mean(axis=0)
        stderr = per_real.std(axis=0, ddof=1) / math.sqrt(len(kept)) if len(kept) > 1 else np.full(T, math.nan)
        hist = counts / (len(kept) * area * cfg.lam0)
    else:
        sir = np.empty((0, T, cfg.fades_per_step))
        rate = np.full(T, math.nan)
        stderr = np.full(T, math.nan)
        hist = np.full((T, edges.size - 1), math.nan)
    samples = []
    for j in range(T):
        parts, total = [], 0
        for r in kept:
            if total >= cfg.keep_displacements or not r[2]:
                break
            take = r[2][j][: cfg.keep_displacements - total]
            parts.append(take)
            total += take.size
        samples.append(np.concatenate(parts) if parts else np.empty(0))
    stats = {
        "kept": len(kept),
        "excluded": excluded,
        "mean_u0": float(np.mean([r[3] for r in kept])) if kept else math.nan,
        "tail_interference": _tail_interference(cfg) if cfg.tail_correction else 0.0,
    }
    return EmpiricalSummary(
        times=np.asarray(cfg.times),
        sir=sir,
        rate=rate,
        rate_stderr=stderr,
        excluded=excluded,
        realizations=cfg.realizations,
        hist_edges=edges,
        hist_ratio=hist,
        displacement_samples=samples,
        stats=stats,
        window_radius=cfg.window_radius,
        obs_radius=cfg.obs_radius,
    )


def ks_statistic(samples, cdf, cdf_left=None, atoms=(), min_samples=100):
    """Kolmogorov-Smirnov distance between the empirical cdf of ``samples`` and ``cdf``.

    ``cdf`` must be right-continuous; ``cdf_left`` (its left limit) is
    needed when the law has atoms and defaults to ``cdf`` otherwise. Samples
    within 1e-9 (relative) of a listed atom location are moved onto it, so
    that floating-point kinematics do not split an atom in two.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ParameterError("no samples")
    if x.size < min_samples:
        raise ParameterError(f"need at least {min_samples} samples, got {x.size}")
    x = x.copy()
    for a in atoms:
        close = np.abs(x - a) <= 1e-9 * max(1.0, abs(a))
        x[close] = a
    x.sort()
    n = x.size
    uniq, first = np.unique(x, return_index=True)
    last = np.append(first[1:], n)  # empirical cdf jumps from first/n to last/n at each value
    F_right = np.asarray(cdf(uniq), dtype=float)
    F_left = np.asarray((cdf_left or cdf)(uniq), dtype=float)
    d_plus = np.max(last / n - F_right)
    d_minus = np.max(F_left - first / n)
    return float(np.clip(max(d_plus, d_minus, 0.0), 0.0, 1.0))


def chi_square_uniformity(angles, bins=36):
    """p-value of Pearson's test that ``angles`` are uniform on [0, 2 pi)."""
    bins = int(bins)
    if bins < 10:
        raise ParameterError("need at least 10 bins")
    a = np.asarray(angles, dtype=float).ravel()
    if a.size < 50 * bins:
        raise ParameterError(f"need at least {50 * bins} angles for {bins} bins, got {a.size}")
    a = np.mod(a, 2.0 * math.pi)
    counts = np.histogram(a, bins=bins, range=(0.0, 2.0 * math.pi))[0]
    return float(sps.chisquare(counts).pvalue)


@dataclass(frozen=True)
class DispersionResult:
    """Counts in disjoint annuli after displacement versus the Poisson prediction."""

    edges: np.ndarray
    mean: np.ndarray
    expected: np.ndarray
    stderr: np.ndarray
    dispersion: np.ndarray  # variance / mean per annulus
    realizations: int

    @property
    def max_z(self):
        return float(np.max(np.abs(self.mean - self.expected) / self.stderr))


def dispersion_check(model, lam0, radius, t, seed, realizations=20000, annuli=20, chunk=500):
    """Displace a homogeneous PPP and count drones in ``annuli`` equal-area rings of the disc ``radius``.

    The initial PPP covers ``radius + v t`` so that drones flying in from
    outside are represented.
    """
    lam0 = float(lam0)
    radius = float(radius)
    t = float(t)
    if lam0 <= 0.0 or radius <= 0.0 or t < 0.0:
        raise ParameterError("need lam0 > 0, radius > 0 and t >= 0")
    edges = radius * np.sqrt(np.linspace(0.0, 1.0, annuli + 1))
    window = radius + model.v * t
    counts = np.zeros((realizations, annuli))
    for start in range(0, realizations, chunk):
        k = min(chunk, realizations - start)
        gen = Rng(seed, _DISPERSION_STREAM, (start,)).generator()
        sizes = gen.poisson(lam0 * math.pi * window * window, k)
        total = int(sizes.sum())
        r = window * np.sqrt(gen.random(total))
        phi = gen.uniform(0.0, 2.0 * math.pi, total)
        pts = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
        if t > 0.0 and total:
            pts = pts + displacements(model, [t], total, gen)[:, 0, :]
        owner = np.repeat(np.arange(k), sizes)
        ring = np.searchsorted(edges, np.hypot(pts[:, 0], pts[:, 1]), side="right") - 1
        ok = (ring >= 0) & (ring < annuli)
        np.add.at(counts[start : start + k], (owner[ok], ring[ok]), 1.0)
    mean = counts.mean(axis=0)
    var = counts.var(axis=0, ddof=1)
    expected = lam0 * math.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    stderr = np.sqrt(expected / realizations)
    return DispersionResult(edges, mean, expected, stderr, var / mean, realizations)

