"""Experiment drivers: each kind turns an :class:`ExperimentConfig` into a :class:`ResultTable`."""

import csv
from dataclasses import dataclass, field
import io
import json
import math
import os
import subprocess

import numpy as np

from . import __version__
from .config import config_hash, emit_config
from .density import bin_average, density_for, empirical_density_oracle, intensity_measure
from .displacement import SeriesSettings, displacement_for
from .errors import ConfigError
from .mobility import SL, sample_net_displacement
from .rate import ChannelParams, RateQuery, RateSettings, average_rate, session_rate
from .simulator import SimConfig, ks_statistic, run_simulation
from .stochastic import Rng
from .validation import run_checks

__all__ = ["ResultTable", "COLUMNS", "run_experiment", "write_outputs", "git_describe"]

COLUMNS = {
    "displacement-dist": (
        ("model", ""), ("t", "s"), ("l", "m"), ("pdf_analytic", "1/m"), ("pdf_mc", "1/m"),
        ("cdf_analytic", ""), ("cdf_mc", ""),
    ),
    "density-profile": (
        ("model", ""), ("u0", "m"), ("t", "s"), ("u_x", "m"), ("ratio_analytic", ""), ("ratio_mc", ""),
        ("ratio_mc_stderr", ""),
    ),
    "theorem1-check": (
        ("model", ""), ("u0", "m"), ("t", "s"), ("radius", "m"), ("count_model", ""), ("count_sl", ""),
        ("count_closed_form", ""), ("sl_not_below", ""),
    ),
    "average-rate": (
        ("model", ""), ("h", "m"), ("m", ""), ("t", "s"), ("rate", "nats"), ("rate_error", "nats"),
        ("rate_mc", "nats"), ("rate_mc_stderr", "nats"),
    ),
    "session-rate": (
        ("model", ""), ("h", "m"), ("m", ""), ("T", "s"), ("session_rate", "nats"), ("error", "nats"),
        ("min_rate", "nats"), ("max_rate", "nats"),
    ),
    "validate-all": (
        ("criterion", ""), ("check", ""), ("case", ""), ("statistic", ""), ("threshold", ""), ("passed", ""),
    ),
}

_COLUMN_NOTES = {
    "displacement-dist": "per model and t: bin centre l on [0, vt]; pdf columns are the continuous part "
                         "averaged over the bin, cdf columns are taken at the bin's upper edge",
    "density-profile": "per model, u0 and t: bin centre u_x on [0, u0 + vt]; lambda/lambda0 averaged over "
                       "the annulus, Monte Carlo at the scaled intensity mc.lam0",
    "theorem1-check": "expected interferers in the disc of radius u0 + vt; sl_not_below is 1 when the "
                      "straight-line count is not below the model's count",
    "average-rate": "R(t) = E[log(1 + SIR)] per model, height h and fading shape m (m0 = mx = m); MC columns "
                    "are nan unless mc.rate_realizations > 0",
    "session-rate": "SR(T) = time average of R over [0, T]; min/max over the quadrature nodes",
    "validate-all": "one row per check; passed is 1 or 0",
}


def columns_help():
    lines = ["CSV columns by kind (name [unit]):"]
    for kind, cols in COLUMNS.items():
        names = ", ".join(f"{n} [{u}]" if u else n for n, u in cols)
        lines.append(f"  {kind}: {names}")
        lines.append(f"      {_COLUMN_NOTES[kind]}")
    return "\n".join(lines)


@dataclass
class ResultTable:
    kind: str
    columns: tuple
    rows: list
    meta: dict = field(default_factory=dict)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"{n}[{u}]" if u else n for n, u in self.columns])
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self):
        return json.dumps(self.meta, indent=2, sort_keys=True) + "\n"


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def git_describe():
    """``git describe`` of the source tree, or ``"unknown"`` outside a checkout."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"], cwd=here, capture_output=True, text=True, timeout=10
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return res.stdout.strip() if res.returncode == 0 and res.stdout.strip() else "unknown"


def _tolerances():
    st, rs = SeriesSettings(), RateSettings()
    return {
        "series_tail": st.tail_tol,
        "series_n_max": st.n_max,
        "rate_relative": rs.tol,
        "rate_u0_cut": rs.u0_cut,
        "rate_ccdf_cut": rs.ccdf_cut,
        "intensity_measure_relative": 1e-6,
    }


def _channel(cfg, h, m):
    ch = cfg.channel
    return ChannelParams(h=h, alpha=ch.alpha, m0=m, mx=m, P=ch.P)


def _displacement_rows(cfg):
    rows, checks = [], []
    for mi, name in enumerate(cfg.models):
        model = cfg.model(name)
        for ti, t in enumerate(cfg.times):
            if t <= 0.0:
                continue
            dist = displacement_for(model, t)
            samples = sample_net_displacement(model, t, cfg.mc.samples, Rng(cfg.seed, 201, (mi, ti)))
            atoms = [a for a, _ in dist.atoms]
            ks = ks_statistic(samples, dist.cdf, dist.cdf_left, atoms=atoms)
            checks.append({"model": name, "t": t, "ks": ks, "atom_at_vt": dist.atom_mass,
                           "total_mass": dist.total_mass})
            snapped = samples.copy()
            for a in atoms:
                snapped[np.abs(snapped - a) <= 1e-9 * max(1.0, a)] = a
            on_atom = np.isin(snapped, atoms)
            edges = np.linspace(0.0, dist.vt, cfg.mc.bins + 1)
            width = np.diff(edges)
            hist = np.histogram(snapped[~on_atom], bins=edges)[0] / (samples.size * width)
            cont = dist.continuous
            if cont is None:
                pdf = np.zeros(edges.size - 1)
            else:
                # continuous mass per bin, taken left of each upper edge
                c = cont.cdf(np.minimum(edges, np.nextafter(dist.vt, 0.0)))
                pdf = np.diff(c) / width
            cdf_mc = np.searchsorted(np.sort(snapped), edges[1:], side="right") / samples.size
            cdf_an = dist.cdf(edges[1:])
            centers = 0.5 * (edges[1:] + edges[:-1])
            for k in range(centers.size):
                rows.append((name, t, centers[k], pdf[k], hist[k], cdf_an[k], cdf_mc[k]))
    return rows, {"checks": checks}


def _density_rows(cfg):
    rows = []
    for ui, u0 in enumerate(cfg.u0):
        for mi, name in enumerate(cfg.models):
            model = cfg.model(name)
            for ti, t in enumerate(cfg.times):
                edges = np.linspace(0.0, u0 + model.v * t if t > 0 else 2.0 * u0, cfg.mc.bins + 1)
                dens = density_for(model, 1.0, u0, t, service=cfg.service)
                ana = bin_average(dens, edges)
                mc = empirical_density_oracle(model, cfg.mc.lam0, u0, t, edges, Rng(cfg.seed, 202, (ui, mi, ti)),
                                              realizations=cfg.mc.realizations)
                for k, u in enumerate(mc.centers):
                    rows.append((name, u0, t, u, ana[k], mc.ratio[k], mc.stderr[k]))
    return rows, {"mc_lam0": cfg.mc.lam0, "realizations": cfg.mc.realizations}


def _count_rows(cfg):
    rows = []
    for u0 in cfg.u0:
        for t in cfg.times:
            sl = SL(cfg.speed)
            radius = u0 + sl.v * t
            ref = intensity_measure(density_for(sl, cfg.lam0, u0, t), radius)
            closed = cfg.lam0 * math.pi * (radius**2 - u0**2)
            for name in cfg.models:
                model = cfg.model(name)
                lam = intensity_measure(density_for(model, cfg.lam0, u0, t), radius)
                rows.append((name, u0, t, radius, lam, ref, closed, lam <= ref * (1.0 + 1e-3)))
    return rows, {}


def _rate_rows(cfg):
    rows = []
    for mi, name in enumerate(cfg.models):
        model = cfg.model(name)
        for h in cfg.heights:
            for m in cfg.fading:
                ch = _channel(cfg, h, m)
                sim = None
                if cfg.mc.rate_realizations > 0:
                    sim = run_simulation(SimConfig(
                        lam0=cfg.lam0, model=model, times=cfg.times, seed=cfg.seed, service=cfg.service,
                        channel=ch, realizations=cfg.mc.rate_realizations, fades_per_step=cfg.mc.fades_per_step,
                        tail_fraction=cfg.mc.tail_fraction,
                    ))
                for j, t in enumerate(cfg.times):
                    r = average_rate(RateQuery(cfg.service, model, cfg.lam0, ch, t))
                    mc = (sim.rate[j], sim.rate_stderr[j]) if sim is not None else (math.nan, math.nan)
                    rows.append((name, h, m, t, r.value, r.error, mc[0], mc[1]))
    return rows, {}


def _session_rows(cfg):
    rows = []
    for name in cfg.models:
        model = cfg.model(name)
        for h in cfg.heights:
            for m in cfg.fading:
                q = RateQuery(cfg.service, model, cfg.lam0, _channel(cfg, h, m))
                for T in cfg.horizons:
                    r = session_rate(q, T)
                    lo = r.meta.get("min_rate", r.value)
                    hi = r.meta.get("max_rate", r.value)
                    rows.append((name, h, m, T, r.value, r.error, lo, hi))
    return rows, {}


def _validate_rows(cfg):
    checks = run_checks(cfg)
    rows = [(c.criterion, c.name, c.case, float(c.statistic), float(c.threshold), bool(c.passed)) for c in checks]
    failed = sorted({c.criterion for c in checks if not c.passed})
    return rows, {"failed_criteria": failed}


_RUNNERS = {
    "displacement-dist": _displacement_rows,
    "density-profile": _density_rows,
    "theorem1-check": _count_rows,
    "average-rate": _rate_rows,
    "session-rate": _session_rows,
    "validate-all": _validate_rows,
}


def run_experiment(cfg):
    """Run ``cfg`` and return its table; metadata ties every row to the config hash and seed."""
    if cfg.kind not in _RUNNERS:
        raise ConfigError(f"kind: unsupported {cfg.kind!r}")
    if not cfg.times:
        raise ConfigError("times: time grid is empty")
    rows, extra = _RUNNERS[cfg.kind](cfg)
    meta = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "git_describe": git_describe(),
        "version": __version__,
        "tolerances": _tolerances(),
        "columns": [{"name": n, "unit": u} for n, u in COLUMNS[cfg.kind]],
        "config": emit_config(cfg),
    }
    meta.update(_jsonable(extra))
    return ResultTable(cfg.kind, COLUMNS[cfg.kind], rows, meta)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_outputs(table, out_dir):
    """Write ``<kind>.csv`` and ``<kind>.json`` into ``out_dir``; returns both paths."""
    os.makedirs(out_dir, exist_ok=True)
    stem = table.kind.replace("-", "_")
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    json_path = os.path.join(out_dir, f"{stem}.json")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(table.to_csv())
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(table.to_json())
    return csv_path, json_path
