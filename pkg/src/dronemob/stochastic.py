"""Seeded sampling of point processes and the scalar laws used by the models.

Random streams are addressed by ``(seed, stream, path)`` and backed by the
counter-based Philox bit generator, so any sub-stream can be rebuilt
without replaying the others.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy import special

from .errors import ParameterError

__all__ = [
    "Rng",
    "ScalarDistribution",
    "Rayleigh",
    "Exponential",
    "Erlang",
    "Deterministic",
    "Uniform",
    "Disc",
    "PlanarPointSet",
    "sample_ppp",
    "sample_scalar",
    "sample_gamma_fading",
]

_U64 = 2**64


def _positive(name, value):
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
    return value


@dataclass(frozen=True)
class Rng:
    """Address of a reproducible random stream.

    Two ``Rng`` values with equal fields always yield bit-identical
    generators; different ``stream`` or ``path`` values yield independent
    streams (via :class:`numpy.random.SeedSequence` spawn keys).
    """

    seed: int
    stream: int = 0
    path: tuple = field(default=())

    def __post_init__(self):
        if not (0 <= int(self.seed) < _U64):
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if int(self.stream) < 0:
            raise ParameterError("stream id must be non-negative")

    def child(self, index):
        """Sub-stream ``index`` of this stream."""
        return replace(self, path=self.path + (int(index),))

    def with_stream(self, stream):
        return replace(self, stream=int(stream), path=())

    def generator(self):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),) + tuple(self.path))
        return np.random.Generator(np.random.Philox(ss))


def _as_generator(rng):
    if isinstance(rng, Rng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected Rng or numpy Generator, got {type(rng).__name__}")


class ScalarDistribution:
    """Common interface of the scalar laws (flight lengths, hover times)."""

    #: True when the law has a density (no atoms).
    continuous = True

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - self.cdf(x)

    @property
    def mean(self):
        raise NotImplementedError

    @property
    def variance(self):
        raise NotImplementedError

    @property
    def support(self):
        """(lo, hi) of the support; hi may be ``inf``."""
        raise NotImplementedError

    def sample(self, gen, size=None):
        raise NotImplementedError

    @property
    def second_moment(self):
        return self.variance + self.mean**2


@dataclass(frozen=True)
class Rayleigh(ScalarDistribution):
    """Rayleigh law stored by its scale ``sigma`` (meters)."""

    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "sigma", _positive("sigma", self.sigma))

    @classmethod
    def from_mean(cls, mean):
        return cls(_positive("mean", mean) / math.sqrt(math.pi / 2.0))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        s2 = self.sigma**2
        return np.where(x > 0.0, x / s2 * np.exp(-0.5 * x * x / s2), 0.0)

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return -np.expm1(-0.5 * (x / self.sigma) ** 2)

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return np.exp(-0.5 * (x / self.sigma) ** 2)

    @property
    def mean(self):
        return self.sigma * math.sqrt(math.pi / 2.0)

    @property
    def variance(self):
        return (2.0 - math.pi / 2.0) * self.sigma**2

    @property
    def support(self):
        return (0.0, math.inf)

    def sample(self, gen, size=None):
        return gen.rayleigh(self.sigma, size)


@dataclass(frozen=True)
class Exponential(ScalarDistribution):
    """Exponential law parameterised by its mean."""

    mean_value: float

    def __post_init__(self):
        object.__setattr__(self, "mean_value", _positive("mean", self.mean_value))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, np.exp(-np.maximum(x, 0.0) / self.mean_value) / self.mean_value, 0.0)

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return -np.expm1(-x / self.mean_value)

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return np.exp(-x / self.mean_value)

    @property
    def mean(self):
        return self.mean_value

    @property
    def variance(self):
        return self.mean_value**2

    @property
    def support(self):
        return (0.0, math.inf)

    def sample(self, gen, size=None):
        return gen.exponential(self.mean_value, size)


@dataclass(frozen=True)
class Erlang(ScalarDistribution):
    """Sum of ``shape`` i.i.d. exponential stages, each with mean ``stage_mean``."""

    shape: int
    stage_mean: float

    def __post_init__(self):
        if int(self.shape) != self.shape or self.shape < 1:
            raise ParameterError(f"Erlang shape must be a positive integer, got {self.shape!r}")
        object.__setattr__(self, "shape", int(self.shape))
        object.__setattr__(self, "stage_mean", _positive("stage mean", self.stage_mean))

    @property
    def rate(self):
        return 1.0 / self.stage_mean

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        k, lam = self.shape, self.rate
        xp = np.where(x > 0.0, x, 1.0)
        logp = k * math.log(lam) + (k - 1) * np.log(xp) - lam * xp - special.gammaln(k)
        out = np.where(x > 0.0, np.exp(logp), 0.0)
        if k == 1:
            out = np.where(x == 0.0, lam, out)
        return out

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return special.gammainc(self.shape, x * self.rate)

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return special.gammaincc(self.shape, x * self.rate)

    @property
    def mean(self):
        return self.shape * self.stage_mean

    @property
    def variance(self):
        return self.shape * self.stage_mean**2

    @property
    def support(self):
        return (0.0, math.inf)

    def sample(self, gen, size=None):
        return gen.gamma(self.shape, self.stage_mean, size)


@dataclass(frozen=True)
class Deterministic(ScalarDistribution):
    """Point mass at ``value``."""

    value: float
    continuous = False

    def __post_init__(self):
        object.__setattr__(self, "value", _positive("value", self.value))

    def pdf(self, x):
        raise ParameterError("a deterministic law has no density")

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.value, 1.0, 0.0)

    @property
    def mean(self):
        return self.value

    @property
    def variance(self):
        return 0.0

    @property
    def support(self):
        return (self.value, self.value)

    def sample(self, gen, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)


@dataclass(frozen=True)
class Uniform(ScalarDistribution):
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0.0 or hi <= lo:
            raise ParameterError(f"Uniform needs 0 <= lo < hi, got ({lo}, {hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    @property
    def mean(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def variance(self):
        return (self.hi - self.lo) ** 2 / 12.0

    @property
    def support(self):
        return (self.lo, self.hi)

    def sample(self, gen, size=None):
        return gen.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class Disc:
    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    @property
    def area(self):
        return math.pi * self.radius**2


@dataclass
class PlanarPointSet:
    """Points (``(N, 2)`` array, meters) of a PPP sample on a disc window."""

    points: np.ndarray
    window: Disc
    density: float

    def __len__(self):
        return len(self.points)


def sample_ppp(lambda0, window, rng):
    """Homogeneous PPP of intensity ``lambda0`` (per m^2) on a disc window.

    A zero-radius window yields an empty set.
    """
    lambda0 = _positive("lambda0", lambda0)
    radius = float(window.radius)
    if not math.isfinite(radius) or radius < 0.0:
        raise ParameterError(f"window radius must be finite and >= 0, got {radius!r}")
    gen = _as_generator(rng)
    count = int(gen.poisson(lambda0 * math.pi * radius * radius)) if radius > 0.0 else 0
    r = radius * np.sqrt(gen.random(count))
    phi = gen.uniform(0.0, 2.0 * math.pi, count)
    cx, cy = window.center
    pts = np.column_stack([cx + r * np.cos(phi), cy + r * np.sin(phi)])
    return PlanarPointSet(points=pts, window=window, density=lambda0)


def sample_scalar(dist, rng, size=None):
    """Draw from ``dist``; a single float when ``size`` is None."""
    out = dist.sample(_as_generator(rng), size)
    return float(out) if size is None else np.asarray(out, dtype=float)


def sample_gamma_fading(m, rng, size=None):
    """Nakagami-m power gain: Gamma(m, 1/m), drawn as a sum of m exponentials."""
    if int(m) != m or m < 1:
        raise ParameterError(f"fading shape m must be an integer >= 1, got {m!r}")
    m = int(m)
    gen = _as_generator(rng)
    shape = (m,) if size is None else (tuple(np.atleast_1d(size)) + (m,))
    out = gen.standard_exponential(shape).sum(axis=-1) / m
    return float(out) if size is None else out
