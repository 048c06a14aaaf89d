import numpy as np
import pytest
from hypothesis import given, strategies as st

from oldrlab.config import (
    CONFIG_VERSION,
    PRESETS,
    SCENARIOS,
    ConfigError,
    apply_overrides,
    config_from_dict,
    dump_config,
    load_config,
    preset,
)
from oldrlab.io import config_hash, make_rng, read_snapshot, write_snapshot


def test_every_scenario_has_a_valid_preset():
    assert set(PRESETS) == set(SCENARIOS)
    for s in SCENARIOS:
        assert preset(s).scenario == s


def test_unknown_keys_are_listed():
    with pytest.raises(ConfigError, match="bogus, zzz"):
        config_from_dict({"scenario": "equilibrium2d", "bogus": 1, "zzz": 2})
    with pytest.raises(ConfigError, match="params"):
        config_from_dict({"params": {"kk": 1}})


@pytest.mark.parametrize(
    "bad",
    [{"n": 48}, {"dt": 0}, {"params": {"R": 0}}, {"scenario": "nope"}, {"n": "abc"}, {"version": CONFIG_VERSION + 1}],
)
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_version_one_is_migrated():
    cfg = config_from_dict({"version": 1, "extra": {"trials": 3}})
    assert cfg.version == CONFIG_VERSION and cfg.options == {"trials": 3}


def test_yaml_roundtrip_and_string_floats(tmp_path):
    cfg = apply_overrides(preset("smalldata-decay"), ["dt=5e-3", "params.k=2", "options.target=0.01"])
    assert cfg.dt == 0.005 and cfg.params.k == 2.0 and cfg.options["target"] == 0.01
    dump_config(cfg, tmp_path / "c.yaml")
    assert load_config(tmp_path / "c.yaml") == cfg
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["nothere=1"])
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["dt"])


def test_hash_ignores_key_order_int_float_and_output_dir():
    a = preset("equilibrium2d")
    b = config_from_dict(dict(reversed(list(a.to_dict().items()))))
    b.output_dir = "/elsewhere"
    assert config_hash(a.hashable()) == config_hash(b.hashable())
    assert config_hash({"x": 1}) == config_hash({"x": 1.0})
    assert config_hash({"x": 1}) != config_hash({"x": 2})


def test_rng_is_reproducible():
    assert np.array_equal(make_rng(7).standard_normal(5), make_rng(7).standard_normal(5))
    assert not np.array_equal(make_rng(7).standard_normal(5), make_rng(8).standard_normal(5))


@given(st.sampled_from([1, 2]), st.sampled_from([8, 16]), st.lists(st.text(min_size=1, max_size=8), min_size=1, max_size=3, unique=True))
def test_snapshot_roundtrip(tmp_path_factory, dim, n, names):
    rng = np.random.default_rng(0)
    fields = {nm: rng.standard_normal((n,) * dim) for nm in names}
    path = tmp_path_factory.mktemp("snap") / "s.oldr"
    write_snapshot(path, dim, n, fields)
    d, m, back = read_snapshot(path)
    assert (d, m) == (dim, n) and list(back) == names
    for nm in names:
        assert np.array_equal(back[nm], fields[nm])


def test_snapshot_layout(tmp_path):
    write_snapshot(tmp_path / "s.oldr", 1, 8, {"ab": np.arange(8.0)})
    raw = (tmp_path / "s.oldr").read_bytes()
    assert raw[:4] == b"OLDR"
    assert raw[4:20] == np.array([1, 1, 8, 1], dtype="<u4").tobytes()
    assert raw[20:26] == np.array([2], dtype="<u4").tobytes() + b"ab"
    assert len(raw) == 26 + 64
    (tmp_path / "bad.oldr").write_bytes(raw + b"x")
    with pytest.raises(ValueError):
        read_snapshot(tmp_path / "bad.oldr")
    with pytest.raises(ValueError):
        write_snapshot(tmp_path / "w.oldr", 2, 8, {"a": np.zeros(8)})
