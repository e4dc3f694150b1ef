"""Experiment configuration: strict YAML parsing, validation and canonical emission.

Units: distances in meters, times in seconds, speeds in m/s, intensities
per square meter.
"""

from dataclasses import asdict, dataclass, field, fields, replace
import hashlib
import math

import yaml

from .errors import ConfigError, ParameterError
from .mobility import RS, RW, RWP, SL, Arc
from .rate import ChannelParams
from .stochastic import Deterministic, Erlang, Exponential, Rayleigh, Uniform

__all__ = [
    "KINDS",
    "LawSpec",
    "MonteCarloSpec",
    "ValidationSpec",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "emit_config",
    "config_hash",
    "kmh_to_ms",
]

KINDS = (
    "displacement-dist",
    "density-profile",
    "theorem1-check",
    "average-rate",
    "session-rate",
    "validate-all",
)
MODEL_NAMES = ("SL", "RS", "RW", "RWP", "ARC")
LAWS = ("rayleigh", "exponential", "erlang", "deterministic", "uniform")

_DEFAULT_TIMES = {
    "displacement-dist": (50.0, 100.0, 300.0),
    "density-profile": (20.0, 40.0, 50.0, 200.0),
    "theorem1-check": (10.0, 20.0, 40.0, 80.0, 200.0),
    "average-rate": (0.0, 20.0, 40.0, 80.0),
    "session-rate": (0.0,),
    "validate-all": (0.0,),
}
_DEFAULT_MODELS = {
    "displacement-dist": ("RW", "RWP"),
    "density-profile": ("SL", "RS", "RW", "RWP"),
    "theorem1-check": ("SL", "RS", "RW", "RWP"),
    "average-rate": ("SL", "RS", "RW", "RWP"),
    "session-rate": ("SL", "RS", "RW", "RWP"),
    "validate-all": ("SL", "RS", "RW", "RWP"),
}
_DEFAULT_U0 = {"theorem1-check": (250.0, 500.0, 1000.0)}


def kmh_to_ms(speed_kmh):
    return float(speed_kmh) / 3.6


@dataclass(frozen=True)
class LawSpec:
    """A scalar law by name: ``mean`` (m or s) for all laws, ``shape`` for erlang, ``spread`` for uniform.

    A uniform law covers ``[mean - spread, mean + spread]``.
    """

    law: str
    mean: float
    shape: int = 1
    spread: float = 0.0

    def build(self):
        if self.law == "rayleigh":
            return Rayleigh.from_mean(self.mean)
        if self.law == "exponential":
            return Exponential(self.mean)
        if self.law == "erlang":
            return Erlang(self.shape, self.mean / self.shape)
        if self.law == "deterministic":
            return Deterministic(self.mean)
        return Uniform(self.mean - self.spread, self.mean + self.spread)


@dataclass(frozen=True)
class MonteCarloSpec:
    """Sizes of the Monte Carlo oracles."""

    lam0: float = 1e-3  # scaled intensity for density oracles, per m^2
    samples: int = 100000  # trajectories per displacement law
    realizations: int = 20000  # density-oracle realizations
    bins: int = 50  # radial / displacement bins
    rate_realizations: int = 0  # network realizations for MC rates (0 = skip)
    fades_per_step: int = 4
    tail_fraction: float = 1e-3
    dispersion_realizations: int = 20000
    dispersion_lam0: float = 1e-4  # per m^2
    dispersion_radius: float = 500.0  # m
    dispersion_time: float = 50.0  # s


@dataclass(frozen=True)
class ValidationSpec:
    """Grids used by ``validate-all``."""

    displacement_times: tuple = (50.0, 100.0, 300.0)
    asymptotic_time: float = 300.0
    density_u0: float = 500.0
    density_times: tuple = (20.0, 40.0, 50.0, 200.0)
    count_u0: tuple = (250.0, 500.0, 1000.0)
    count_times: tuple = (10.0, 20.0, 40.0, 80.0, 200.0)
    rate_times: tuple = (0.0, 20.0, 40.0, 80.0)
    session_horizon: float = 120.0
    closure_samples: int = 100000
    boundary_u0: tuple = (500.0,)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    service: str = "UDM"
    lam0: float = 1e-6
    speed: float = 12.5
    flight: LawSpec = field(default_factory=lambda: LawSpec("rayleigh", 500.0))
    hover: LawSpec = field(default_factory=lambda: LawSpec("exponential", 5.0))
    arc_radius: float = 500.0
    models: tuple = ()
    channel: ChannelParams = field(default_factory=ChannelParams)
    times: tuple = ()
    u0: tuple = (500.0,)
    heights: tuple = ()
    fading: tuple = ()
    horizons: tuple = (120.0,)
    mc: MonteCarloSpec = field(default_factory=MonteCarloSpec)
    validate: ValidationSpec = field(default_factory=ValidationSpec)

    def model(self, name):
        flight = self.flight.build()
        if name == "SL":
            return SL(self.speed)
        if name == "RS":
            return RS(self.speed, flight)
        if name == "RW":
            return RW(self.speed, flight)
        if name == "RWP":
            return RWP(self.speed, flight, self.hover.build())
        if name == "ARC":
            return Arc(self.speed, self.arc_radius)
        raise ConfigError(f"models: unknown model {name!r}")


# --------------------------------------------------------------------------
# strict parsing


def _num(path, value, *, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite")
    if positive and value <= 0.0:
        raise ConfigError(f"{path}: must be > 0")
    if nonneg and value < 0.0:
        raise ConfigError(f"{path}: must be >= 0")
    return value


def _int(path, value, *, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}")
    return int(value)


def _num_list(path, value, **kw):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{path}: expected a list, got {value!r}")
    return tuple(_num(f"{path}[{i}]", v, **kw) for i, v in enumerate(value))


def _mapping(path, value, allowed):
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {value!r}")
    unknown = [k for k in value if k not in allowed]
    if unknown:
        where = f" in {path}" if path else ""
        raise ConfigError(f"unknown key {unknown[0]!r}{where}")
    return value


def _law(path, doc):
    doc = _mapping(path, doc, ("law", "mean", "shape", "spread"))
    if "law" not in doc or "mean" not in doc:
        raise ConfigError(f"{path}: 'law' and 'mean' are required")
    law = doc["law"]
    if law not in LAWS:
        raise ConfigError(f"{path}.law: expected one of {', '.join(LAWS)}, got {law!r}")
    mean = _num(f"{path}.mean", doc["mean"], positive=True)
    shape = _int(f"{path}.shape", doc.get("shape", 1), minimum=1)
    spread = _num(f"{path}.spread", doc.get("spread", 0.0), nonneg=True)
    if law == "uniform" and spread >= mean:
        raise ConfigError(f"{path}.spread: must be below the mean")
    return LawSpec(law, mean, shape, spread)


def _channel(doc):
    doc = _mapping("channel", doc, ("h", "alpha", "m0", "mx", "P"))
    kw = {}
    for key in ("h", "alpha", "P"):
        if key in doc:
            kw[key] = _num(f"channel.{key}", doc[key])
    for key in ("m0", "mx"):
        if key in doc:
            kw[key] = _int(f"channel.{key}", doc[key], minimum=1)
    if "alpha" in kw and kw["alpha"] <= 2.0:
        raise ConfigError("α must exceed 2")
    try:
        return ChannelParams(**kw)
    except ParameterError as exc:
        raise ConfigError(f"channel: {exc}") from None


def _dataclass_section(name, cls, doc):
    names = [f.name for f in fields(cls)]
    doc = _mapping(name, doc, names)
    defaults = cls()
    kw = {}
    for key, value in doc.items():
        path = f"{name}.{key}"
        default = getattr(defaults, key)
        if isinstance(default, tuple):
            kw[key] = _num_list(path, value, nonneg=True)
        elif isinstance(default, int):
            kw[key] = _int(path, value, minimum=0)
        else:
            kw[key] = _num(path, value, positive=True)
    return replace(defaults, **kw)


_TOP = (
    "kind", "seed", "service", "lam0", "speed", "speed_kmh", "flight", "hover", "arc_radius",
    "models", "channel", "times", "u0", "heights", "fading", "horizons", "mc", "validate",
)


def parse_config(text, kind=None):
    """Parse a YAML experiment document; ``kind`` fills in a missing ``kind`` key.

    Every error names the offending key.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed document: {exc}") from None
    if doc is None:
        doc = {}
    doc = _mapping("", doc, _TOP)
    kind = doc.get("kind", kind)
    if kind is None:
        raise ConfigError("missing required key 'kind'")
    if kind not in KINDS:
        raise ConfigError(f"kind: expected one of {', '.join(KINDS)}, got {kind!r}")
    if "seed" not in doc:
        raise ConfigError("missing required key 'seed'")
    seed = _int("seed", doc["seed"], minimum=0)
    if seed >= 2**64:
        raise ConfigError("seed: must fit in 64 bits")
    service = doc.get("service", "UDM")
    if service not in ("UDM", "UIM"):
        raise ConfigError(f"service: expected UDM or UIM, got {service!r}")
    if "speed" in doc and "speed_kmh" in doc:
        raise ConfigError("speed: give either 'speed' (m/s) or 'speed_kmh', not both")
    if "speed_kmh" in doc:
        speed = kmh_to_ms(_num("speed_kmh", doc["speed_kmh"], positive=True))
    else:
        speed = _num("speed", doc.get("speed", 12.5), positive=True)
    models = doc.get("models", list(_DEFAULT_MODELS[kind]))
    if not isinstance(models, (list, tuple)) or not models:
        raise ConfigError("models: expected a non-empty list")
    for i, m in enumerate(models):
        if m not in MODEL_NAMES:
            raise ConfigError(f"models[{i}]: expected one of {', '.join(MODEL_NAMES)}, got {m!r}")
    times = _num_list("times", doc.get("times", list(_DEFAULT_TIMES[kind])), nonneg=True)
    if not times:
        raise ConfigError("times: time grid is empty")
    channel = _channel(doc.get("channel", {}))
    heights = _num_list("heights", doc.get("heights", [channel.h]), positive=True)
    fading = doc.get("fading", [channel.m0])
    if not isinstance(fading, (list, tuple)) or not fading:
        raise ConfigError("fading: expected a non-empty list")
    fading = tuple(_int(f"fading[{i}]", m, minimum=1) for i, m in enumerate(fading))
    horizons = _num_list("horizons", doc.get("horizons", [120.0]), positive=True)
    if not horizons:
        raise ConfigError("horizons: empty list")
    u0 = _num_list("u0", doc.get("u0", list(_DEFAULT_U0.get(kind, (500.0,)))), nonneg=True)
    if not u0:
        raise ConfigError("u0: empty list")
    cfg = ExperimentConfig(
        kind=kind,
        seed=seed,
        service=service,
        lam0=_num("lam0", doc.get("lam0", 1e-6), positive=True),
        speed=speed,
        flight=_law("flight", doc["flight"]) if "flight" in doc else LawSpec("rayleigh", 500.0),
        hover=_law("hover", doc["hover"]) if "hover" in doc else LawSpec("exponential", 5.0),
        arc_radius=_num("arc_radius", doc.get("arc_radius", 500.0), positive=True),
        models=tuple(models),
        channel=channel,
        times=times,
        u0=u0,
        heights=heights,
        fading=fading,
        horizons=horizons,
        mc=_dataclass_section("mc", MonteCarloSpec, doc.get("mc", {})),
        validate=_dataclass_section("validate", ValidationSpec, doc.get("validate", {})),
    )
    if cfg.mc.bins < 1 or cfg.mc.samples < 100 or cfg.mc.realizations < 1:
        raise ConfigError("mc: bins >= 1, samples >= 100 and realizations >= 1 are required")
    return cfg


def load_config(path, kind=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, kind)


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    return value


def _as_document(cfg, with_seed=True):
    doc = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "service": cfg.service,
        "lam0": cfg.lam0,
        "speed": cfg.speed,
        "flight": asdict(cfg.flight),
        "hover": asdict(cfg.hover),
        "arc_radius": cfg.arc_radius,
        "models": list(cfg.models),
        "channel": {"h": cfg.channel.h, "alpha": cfg.channel.alpha, "m0": cfg.channel.m0,
                    "mx": cfg.channel.mx, "P": cfg.channel.P},
        "times": cfg.times,
        "u0": cfg.u0,
        "heights": cfg.heights,
        "fading": cfg.fading,
        "horizons": cfg.horizons,
        "mc": asdict(cfg.mc),
        "validate": asdict(cfg.validate),
    }
    if not with_seed:
        del doc["seed"]
    return _plain(doc)


def emit_config(cfg):
    """Canonical YAML text; ``parse_config(emit_config(cfg)) == cfg``."""
    return yaml.safe_dump(_as_document(cfg), sort_keys=False, default_flow_style=None)


def config_hash(cfg):
    """SHA-256 of the canonical document without the seed."""
    text = yaml.safe_dump(_as_document(cfg, with_seed=False), sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
