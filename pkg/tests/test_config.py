import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dronemob.config import (
    KINDS,
    config_hash,
    emit_config,
    kmh_to_ms,
    load_config,
    parse_config,
)
from dronemob.errors import ConfigError
from dronemob.mobility import RWP, SL, Arc


def test_minimal_document_defaults():
    cfg = parse_config("kind: average-rate\nseed: 1\n")
    assert cfg.lam0 == 1e-6
    assert cfg.channel.alpha == 3.0
    assert cfg.channel.h == 100.0
    assert cfg.speed == 12.5


def test_kind_from_caller():
    assert parse_config("seed: 3\n", kind="session-rate").kind == "session-rate"


@pytest.mark.parametrize(
    "text, message",
    [
        ("kind: average-rate\nseed: 1\nchannel: {alpha: 1.5}\n", "α must exceed 2"),
        ("kind: average-rate\nseed: 1\nfoo: 2\n", "foo"),
        ("kind: average-rate\nseed: 1\nmc: {bar: 2}\n", "bar"),
        ("kind: average-rate\nseed: 1\ntimes: []\n", "times"),
        ("kind: average-rate\n", "seed"),
        ("kind: nope\nseed: 1\n", "kind"),
        ("kind: average-rate\nseed: -4\n", "seed"),
        ("kind: average-rate\nseed: 1\nspeed: 3\nspeed_kmh: 10\n", "speed"),
        ("kind: average-rate\nseed: 1\nmodels: [XX]\n", "models"),
        ("kind: average-rate\nseed: 1\nflight: {law: weibull, mean: 3}\n", "flight"),
        ("kind: average-rate\nseed: 1\nlam0: -1\n", "lam0"),
        ("kind: average-rate\nseed: [1\n", "malformed"),
    ],
)
def test_invalid_documents(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_speed_in_kmh():
    cfg = parse_config("kind: average-rate\nseed: 1\nspeed_kmh: 45\n")
    assert cfg.speed == pytest.approx(kmh_to_ms(45.0)) == pytest.approx(12.5)


def test_models_built_from_names():
    cfg = parse_config("kind: theorem1-check\nseed: 1\nmodels: [SL, RWP, ARC]\narc_radius: 300\n")
    assert isinstance(cfg.model("SL"), SL)
    assert isinstance(cfg.model("RWP"), RWP)
    assert cfg.model("ARC") == Arc(12.5, 300.0)


def test_grids_per_kind():
    assert parse_config("kind: density-profile\nseed: 1\n").times == (20.0, 40.0, 50.0, 200.0)
    assert parse_config("kind: displacement-dist\nseed: 1\n").times == (50.0, 100.0, 300.0)


@pytest.mark.parametrize("kind", KINDS)
def test_round_trip(kind):
    cfg = parse_config(f"kind: {kind}\nseed: 99\n")
    assert parse_config(emit_config(cfg)) == cfg


def test_hash_ignores_seed_only():
    a = parse_config("kind: average-rate\nseed: 1\n")
    b = parse_config("kind: average-rate\nseed: 2\n")
    c = parse_config("kind: average-rate\nseed: 1\nlam0: 2.0e-6\n")
    assert config_hash(a) == config_hash(b) != config_hash(c)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/config.yaml")


def test_shipped_configs_parse():
    import glob
    import os

    paths = glob.glob(os.path.join(os.path.dirname(__file__), "..", "configs", "*.yaml"))
    assert len(paths) >= 6
    for path in paths:
        cfg = load_config(path)
        assert parse_config(emit_config(cfg)) == cfg


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**64 - 1),
    lam0=st.floats(min_value=1e-9, max_value=1e-2),
    h=st.floats(min_value=1.0, max_value=1e3),
    alpha=st.floats(min_value=2.01, max_value=6.0),
    times=st.lists(st.floats(min_value=0.0, max_value=1e4), min_size=1, max_size=6),
    models=st.lists(st.sampled_from(["SL", "RS", "RW", "RWP", "ARC"]), min_size=1, max_size=5, unique=True),
)
def test_round_trip_property(seed, lam0, h, alpha, times, models):
    import yaml

    doc = {"kind": "average-rate", "seed": seed, "lam0": lam0, "channel": {"h": h, "alpha": alpha},
           "times": times, "models": models}
    cfg = parse_config(yaml.safe_dump(doc))
    assert parse_config(emit_config(cfg)) == cfg
    assert cfg.seed == seed
