import json

import pytest

from fkquasi import config
from fkquasi.errors import ConfigurationError

BASE = {
    "potential": {"kind": "one_minus_cos"},
    "interaction": {"family": "nn_quadratic_1d", "window": {"lo": -10, "hi": 10}},
    "type": {"sigma": 5, "radius": 3.2},
    "mode": {"kind": "magnified", "lambda": 20},
}


def dumps(cfg):
    return json.dumps(cfg, indent=2)


def test_presets_load():
    names = config.preset_names()
    assert {"fk-classic", "fibonacci-scaled", "fibonacci-address", "fk-multidim"} <= set(names)
    for n in names:
        cfg = config.load(n)
        assert cfg["seed"] == 0 or isinstance(cfg["seed"], int)


def test_defaults_filled():
    cfg = config.loads(dumps(BASE))
    assert cfg["tolerances"]["tol"] == 1e-12
    assert cfg["atlas"]["select"] == "all"
    assert cfg["verify"]["probes"] == 5


def test_unknown_key_line():
    cfg = json.loads(json.dumps(BASE))
    cfg["mode"]["lamda"] = 3
    text = dumps(cfg)
    with pytest.raises(ConfigurationError) as exc:
        config.loads(text, "x.json")
    line = next(k for k, ln in enumerate(text.splitlines(), 1) if '"lamda"' in ln)
    assert str(exc.value).startswith(f"x.json:{line}:")


def test_missing_lambda():
    cfg = json.loads(json.dumps(BASE))
    del cfg["mode"]["lambda"]
    with pytest.raises(ConfigurationError, match="lambda"):
        config.loads(dumps(cfg))


def test_p_power_requires_p():
    cfg = json.loads(json.dumps(BASE))
    cfg["interaction"]["family"] = "p_power_1d"
    with pytest.raises(ConfigurationError, match="'p'"):
        config.loads(dumps(cfg))


def test_auto_mode_needs_rule():
    cfg = json.loads(json.dumps(BASE))
    cfg["mode"] = {"kind": "auto"}
    with pytest.raises(ConfigurationError, match="auto"):
        config.loads(dumps(cfg))


def test_invalid_json_line():
    with pytest.raises(ConfigurationError, match=r"^c.json:3:"):
        config.loads('{\n "a": 1,\n oops\n}', "c.json")


def test_missing_file():
    with pytest.raises(ConfigurationError, match="no such"):
        config.load("/nonexistent/cfg.json")
