import json

import pytest
import yaml

from qrefl.config import RunConfig, config_from_dict, dump_config, load_config, parse_length
from qrefl.errors import ConfigError


def test_defaults_describe_reference_system():
    c = load_config()
    assert c.potential_model().c3 == pytest.approx(236.0)
    assert c.beam_model().E0 == 0.63
    assert c.roughness_model().L == 750.0
    assert c.material.well_minimum_a == 2.65


def test_lengths_with_units():
    assert parse_length("10 nm") == 100.0
    assert parse_length("75nm") == 750.0
    assert parse_length("2.65 Å") == 2.65
    assert parse_length("0.1 um") == 1000.0
    assert parse_length(12) == 12.0
    for bad in ("10 parsec", "nm", True, [1]):
        with pytest.raises(ConfigError):
            parse_length(bad)
    c = config_from_dict({"potential": {"l": "10 nm"}, "roughness": {"L": "75 nm"}})
    assert c.potential.l == 100.0 and c.roughness.L == 750.0


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"beam": {"energy": 1.0}})
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"detector": {}})


def test_type_and_invariant_checks():
    for bad in (
        {"beam": {"E0": "fast"}},
        {"beam": {"E0": -1.0}},
        {"roughness": {"enabled": "yes"}},
        {"scan": {"theta_max_deg": 90.0}},
        {"scan": {"theta_steps": 1.5}},
        {"solver": {"tolerance": 0.1}},
        {"fit": {"free": ["l", "mass"]}},
        {"fit": {"bounds": {"l": [10.0, 5.0]}}},
        {"fit": {"loss_space": "abs"}},
        {"asymptote": {"margin": 0.5}},
        {"material": {"epsilon": 0.9}},
    ):
        with pytest.raises(ConfigError):
            config_from_dict(bad)


def test_c4_from_material_when_null():
    c = config_from_dict({"potential": {"c4": None}})
    assert c.c4() == pytest.approx(23610.0786, rel=1e-6)


@pytest.mark.parametrize("fmt", ["yaml", "json"])
def test_round_trip(fmt):
    c = config_from_dict({"potential": {"l": "9.5 nm"}, "fit": {"free": "l,sigma"}, "scan": {"theta_steps": 7}})
    text = dump_config(c, fmt)
    data = json.loads(text) if fmt == "json" else yaml.safe_load(text)
    c2 = config_from_dict(data)
    assert c2 == c
    assert dump_config(c2, fmt) == text


def test_load_files(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("beam:\n  E0: 0.5\n")
    assert load_config(p).beam.E0 == 0.5
    q = tmp_path / "c.json"
    q.write_text('{"scan": {"nodes": 9}}')
    assert load_config(q).scan.nodes == 9
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("beam: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_roughness_disabled():
    assert config_from_dict({"roughness": {"enabled": False}}).roughness_model() is None


def test_default_is_runconfig():
    assert isinstance(load_config(), RunConfig)
