"""Mobility models, single-drone trajectories and batch displacement sampling."""

from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .errors import ParameterError
from .stochastic import ScalarDistribution, _as_generator, _positive

__all__ = [
    "MobilityModel",
    "SL",
    "RS",
    "RW",
    "RWP",
    "Arc",
    "Trajectory",
    "ServingPathUDM",
    "build_trajectory",
    "position_at",
    "net_displacement",
    "displacements",
    "sample_net_displacement",
    "walk_after_flights",
]

TWO_PI = 2.0 * math.pi


class MobilityModel:
    """Base class of the i.i.d. mobility models."""

    name = "?"
    v: float

    def _check(self):
        object.__setattr__(self, "v", _positive("speed v", self.v))
        for attr in ("flight", "hover"):
            law = getattr(self, attr, None)
            if law is None:
                continue
            if not isinstance(law, ScalarDistribution):
                raise ParameterError(f"{attr} must be a ScalarDistribution")
            lo, _ = law.support
            if lo < 0.0 or (attr == "flight" and law.mean <= 0.0):
                raise ParameterError(f"{attr} law must live on (0, inf)")


@dataclass(frozen=True)
class SL(MobilityModel):
    """Straight line at constant speed in a uniform random direction."""

    v: float
    name = "SL"

    def __post_init__(self):
        self._check()


@dataclass(frozen=True)
class RS(MobilityModel):
    """One flight of random length, then hover forever."""

    v: float
    flight: ScalarDistribution
    name = "RS"

    def __post_init__(self):
        self._check()


@dataclass(frozen=True)
class RW(MobilityModel):
    """Back-to-back flights with i.i.d. lengths and uniform headings."""

    v: float
    flight: ScalarDistribution
    name = "RW"

    def __post_init__(self):
        self._check()


@dataclass(frozen=True)
class RWP(MobilityModel):
    """Random walk with an i.i.d. hover before every flight (including the first)."""

    v: float
    flight: ScalarDistribution
    hover: ScalarDistribution
    name = "RWP"

    def __post_init__(self):
        self._check()


@dataclass(frozen=True)
class Arc(MobilityModel):
    """Synthetic curved model: constant-speed motion along a circle of radius ``radius``.

    Initial heading is uniform and the turning sense is a fair coin, so the
    model is i.i.d. and isotropic. Net displacement is the chord
    ``2 radius |sin(v t / (2 radius))|``.
    """

    v: float
    radius: float
    name = "ARC"

    def __post_init__(self):
        self._check()
        object.__setattr__(self, "radius", _positive("arc radius", self.radius))


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear path: segment k hovers ``hover[k]`` seconds, then flies
    ``length[k]`` meters along heading ``theta[k]`` at speed ``v``.

    After the last segment the drone stays put (the RS behaviour); SL uses a
    single segment of infinite length.
    """

    origin: np.ndarray
    theta: np.ndarray
    length: np.ndarray
    hover: np.ndarray
    v: float
    horizon: float
    _seg_start: np.ndarray = field(init=False, repr=False)
    _move_start: np.ndarray = field(init=False, repr=False)
    _seg_end: np.ndarray = field(init=False, repr=False)
    _start_pts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(2)
        theta = np.asarray(self.theta, dtype=float)
        length = np.asarray(self.length, dtype=float)
        hover = np.asarray(self.hover, dtype=float)
        move_start = np.empty_like(length)
        seg_end = np.empty_like(length)
        seg_start = np.empty_like(length)
        clock = 0.0
        for k in range(len(length)):
            seg_start[k] = clock
            move_start[k] = clock + hover[k]
            seg_end[k] = move_start[k] + length[k] / self.v
            clock = seg_end[k]
        steps = np.column_stack([np.cos(theta), np.sin(theta)]) * np.where(np.isfinite(length), length, 0.0)[:, None]
        start_pts = origin + np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)[:-1]])
        for name, val in (("origin", origin), ("theta", theta), ("length", length), ("hover", hover),
                          ("_seg_start", seg_start), ("_move_start", move_start), ("_seg_end", seg_end),
                          ("_start_pts", start_pts)):
            object.__setattr__(self, name, val)

    @property
    def n_segments(self):
        return len(self.length)

    def waypoint_times(self):
        """Times at which each flight ends."""
        return self._seg_end.copy()

    def hover_time_before(self, t):
        """Accumulated hover time in [0, t]."""
        t = float(t)
        h = np.clip(t - self._seg_start, 0.0, self.hover)
        return float(h.sum())

    def position_at(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0.0) or np.any(t_arr > self.horizon * (1 + 1e-12)):
            raise ParameterError(f"t must lie in [0, {self.horizon}]")
        k = np.clip(np.searchsorted(self._seg_start, t_arr, side="right") - 1, 0, self.n_segments - 1)
        start = self._start_pts[k]
        travelled = np.clip((t_arr - self._move_start[k]) * self.v, 0.0, None)
        travelled = np.minimum(travelled, self.length[k])
        direction = np.stack([np.cos(self.theta[k]), np.sin(self.theta[k])], axis=-1)
        return start + travelled[..., None] * direction

    def net_displacement(self, t):
        return np.linalg.norm(self.position_at(t) - self.origin, axis=-1)


@dataclass(frozen=True)
class ServingPathUDM:
    """Serving drone under the UE-dependent model: flies straight to the UE's zenith, then hovers."""

    u0: float
    v: float

    def distance_at(self, t):
        return np.maximum(self.u0 - self.v * np.asarray(t, dtype=float), 0.0)


def build_trajectory(model, origin, horizon, rng):
    """Draw one trajectory of ``model`` covering ``[0, horizon]``."""
    horizon = _positive("horizon", horizon)
    gen = _as_generator(rng)
    v = model.v
    if isinstance(model, SL):
        theta = [gen.uniform(0.0, TWO_PI)]
        return Trajectory(origin, theta, [math.inf], [0.0], v, horizon)
    if isinstance(model, RS):
        theta = [gen.uniform(0.0, TWO_PI)]
        length = [float(model.flight.sample(gen))]
        return Trajectory(origin, theta, length, [0.0], v, horizon)
    if not isinstance(model, (RW, RWP)):
        raise ParameterError(f"no piecewise-linear trajectory for model {model.name}")
    thetas, lengths, hovers = [], [], []
    clock = 0.0
    while clock < horizon:
        h = float(model.hover.sample(gen)) if isinstance(model, RWP) else 0.0
        r = float(model.flight.sample(gen))
        thetas.append(gen.uniform(0.0, TWO_PI))
        lengths.append(r)
        hovers.append(h)
        clock += h + r / v
    return Trajectory(origin, thetas, lengths, hovers, v, horizon)


def position_at(traj, t):
    return traj.position_at(t)


def net_displacement(traj, t):
    return traj.net_displacement(t)


def _chunk_width(model, t_max):
    mean_time = model.flight.mean / model.v + (model.hover.mean if isinstance(model, RWP) else 0.0)
    return int(min(64, max(4, math.ceil(1.25 * t_max / mean_time) + 2)))


def displacements(model, times, n, rng, backend=None):
    """Displacement vectors of ``n`` independent drones at the given times.

    Returns an array of shape ``(n, len(times), 2)``. ``times`` must be
    non-negative; they are evaluated in sorted order and returned in the
    caller's order.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0.0) or not np.all(np.isfinite(times)):
        raise ParameterError("times must be finite and >= 0")
    order = np.argsort(times, kind="stable")
    ts = np.ascontiguousarray(times[order])
    gen = _as_generator(rng)
    n = int(n)
    out = np.empty((n, ts.size, 2))
    v = model.v
    if isinstance(model, (SL, RS, Arc)):
        theta = gen.uniform(0.0, TWO_PI, n)
        if isinstance(model, Arc):
            sense = np.where(gen.random(n) < 0.5, -1.0, 1.0)
            half = v * ts[None, :] / (2.0 * model.radius)
            dist = 2.0 * model.radius * np.abs(np.sin(half))
            heading = theta[:, None] + sense[:, None] * half
            out[..., 0] = dist * np.cos(heading)
            out[..., 1] = dist * np.sin(heading)
        else:
            if isinstance(model, SL):
                dist = np.broadcast_to(v * ts[None, :], (n, ts.size))
            else:
                r = np.asarray(model.flight.sample(gen, n), dtype=float)
                dist = np.minimum(v * ts[None, :], r[:, None])
            out[..., 0] = dist * np.cos(theta)[:, None]
            out[..., 1] = dist * np.sin(theta)[:, None]
    elif isinstance(model, (RW, RWP)):
        _, advance = kernels.get_backend(backend)
        x = np.zeros(n)
        y = np.zeros(n)
        clock = np.zeros(n)
        tidx = np.zeros(n, dtype=np.int64)
        out_x = np.empty((n, ts.size))
        out_y = np.empty((n, ts.size))
        width = _chunk_width(model, ts[-1] if ts.size else 0.0)
        live = np.arange(n)
        while live.size:
            k = width
            lengths = np.ascontiguousarray(np.asarray(model.flight.sample(gen, (live.size, k)), dtype=float))
            angles = gen.uniform(0.0, TWO_PI, (live.size, k))
            if isinstance(model, RWP):
                hovers = np.ascontiguousarray(np.asarray(model.hover.sample(gen, (live.size, k)), dtype=float))
            else:
                hovers = np.zeros((live.size, k))
            sx, sy, sc, st = x[live], y[live], clock[live], tidx[live]
            ox, oy = out_x[live], out_y[live]
            advance(lengths, angles, hovers, float(v), ts, sx, sy, sc, st, ox, oy)
            x[live], y[live], clock[live], tidx[live] = sx, sy, sc, st
            out_x[live], out_y[live] = ox, oy
            live = live[st < ts.size]
        out[..., 0] = out_x
        out[..., 1] = out_y
    else:
        raise ParameterError(f"unsupported model {model!r}")
    result = np.empty_like(out)
    result[:, order] = out
    return result


def sample_net_displacement(model, t, n, rng, backend=None):
    """``n`` i.i.d. samples of the net displacement L(t)."""
    d = displacements(model, [t], n, rng, backend=backend)[:, 0, :]
    return np.hypot(d[:, 0], d[:, 1])


def walk_after_flights(flight, n_flights, n, rng):
    """Total length S, net displacement Z and end bearing Psi after ``n_flights`` flights.

    Bearings are returned on [0, 2 pi).
    """
    gen = _as_generator(rng)
    r = np.asarray(flight.sample(gen, (n, n_flights)), dtype=float)
    th = gen.uniform(0.0, TWO_PI, (n, n_flights))
    xs = (r * np.cos(th)).sum(axis=1)
    ys = (r * np.sin(th)).sum(axis=1)
    psi = np.mod(np.arctan2(ys, xs), TWO_PI)
    return r.sum(axis=1), np.hypot(xs, ys), psi
