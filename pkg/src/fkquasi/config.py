"""Pipeline configuration: JSON schema, loading and preset lookup.

Configurations are JSON objects validated against :data:`SCHEMA` before any
work starts. Unknown keys are rejected, and validation errors point at the
offending line of the file.
"""
from __future__ import annotations

import copy
import json
import re
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigurationError

_number = {"type": "number"}
_vector = {"type": "array", "items": _number, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}
_box = {
    "type": "object",
    "properties": {"lo": {"oneOf": [_number, _vector]}, "hi": {"oneOf": [_number, _vector]}},
    "required": ["lo", "hi"],
    "additionalProperties": False,
}
_ball = {
    "type": "object",
    "properties": {"center": _vector, "radius": {"type": "number", "exclusiveMinimum": 0}},
    "required": ["radius"],
    "additionalProperties": False,
}
_region = {"oneOf": [_box, _ball]}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fkquasi pipeline configuration",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "pointset": {
            "type": "object",
            "properties": {
                "family": {"enum": ["periodic", "fibonacci", "ammann-beenker"]},
                "dim": {"type": "integer", "minimum": 1},
                "spacing": {"type": "number", "exclusiveMinimum": 0},
                "extent": _region,
            },
            "required": ["family", "extent"],
            "additionalProperties": False,
        },
        "potential": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["bump_sum", "one_minus_cos"]},
                "amplitude": _number,
                "support_radius": {"type": "number", "exclusiveMinimum": 0},
                "sign": {"enum": [1, -1]},
                "dim": {"type": "integer", "minimum": 1},
                "affinity": _matrix,
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "atlas": {
            "type": "object",
            "properties": {
                "region": _region,
                "select": {"enum": ["all", "minima", "maxima"]},
                "grid_step": {"type": "number", "exclusiveMinimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-10},
                "det_threshold": {"type": "number", "exclusiveMinimum": 0},
                "probe_count": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "interaction": {
            "type": "object",
            "properties": {
                "family": {"enum": ["none", "nn_quadratic_1d", "laplacian_quadratic",
                                    "p_power_1d", "address_neighborhood"]},
                "window": _box,
                "p": {"type": "number", "minimum": 2},
                "tau": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["family", "window"],
            "additionalProperties": False,
            "allOf": [
                {"if": {"properties": {"family": {"const": "p_power_1d"}}},
                 "then": {"required": ["p"]}},
                {"if": {"properties": {"family": {"const": "address_neighborhood"}}},
                 "then": {"required": ["tau"]}},
            ],
        },
        "type": {
            "type": "object",
            "properties": {
                "sigma": {"oneOf": [_number, _matrix, {"const": "psi"}]},
                "radius": {"oneOf": [{"type": "number", "minimum": 0}, {"const": "auto"}]},
            },
            "required": ["sigma", "radius"],
            "additionalProperties": False,
        },
        "mode": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["magnified", "scaled", "auto"]},
                "lambda": {"type": "number", "exclusiveMinimum": 0},
                "n": {"type": "integer", "minimum": 0},
                "multiplier": {"type": "number", "exclusiveMinimum": 0},
                "offset": {"type": "integer", "minimum": 1},
                "regime": {"enum": ["magnified", "scaled"]},
                "anchor_power": {"type": "integer", "minimum": 0},
            },
            "required": ["kind"],
            "additionalProperties": False,
            "allOf": [
                {"if": {"properties": {"kind": {"const": "magnified"}}},
                 "then": {"required": ["lambda"]}},
                {"if": {"properties": {"kind": {"const": "scaled"}}},
                 "then": {"required": ["n"]}},
            ],
        },
        "tolerances": {
            "type": "object",
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "residual": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "verify": {
            "type": "object",
            "properties": {"probes": {"type": "integer", "minimum": 0}},
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"prefix": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"}},
            "additionalProperties": False,
        },
    },
    "required": ["potential", "interaction", "type", "mode"],
    "additionalProperties": False,
}

DEFAULTS = {
    "seed": 0,
    "atlas": {"select": "all", "tol": 1e-12, "det_threshold": 1e-8, "probe_count": 8},
    "tolerances": {"tol": 1e-12, "max_iter": 10_000, "residual": 1e-8},
    "verify": {"probes": 5},
    "output": {},
}


def preset_names():
    return sorted(p.name[:-5] for p in resources.files("fkquasi.presets").iterdir()
                  if p.name.endswith(".json"))


def _line_of(text, path, message):
    """Best-effort line number of the JSON element at ``path``."""
    pos = 0
    for elem in path:
        if isinstance(elem, str):
            m = re.compile(r'"%s"\s*:' % re.escape(elem)).search(text, pos)
            if m:
                pos = m.start()
    extra = re.search(r"\('([^']+)' (?:was|were) unexpected\)", message)
    if extra:
        m = re.compile(r'"%s"\s*:' % re.escape(extra.group(1))).search(text, pos)
        if m:
            pos = m.start()
    return text.count("\n", 0, pos) + 1


def validate(cfg, text=None, source="<config>"):
    """Raise :class:`ConfigurationError` with a ``source:line:`` prefix on failure."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(e.path), list(map(str, e.path))))
    if errors:
        err = errors[0]
        line = _line_of(text, list(err.path), err.message) if text is not None else 1
        where = "/".join(map(str, err.path)) or "<root>"
        raise ConfigurationError(f"{source}:{line}: {where}: {err.message}")
    mode = cfg["mode"]
    if mode["kind"] == "auto" and "multiplier" not in mode and "offset" not in mode:
        line = _line_of(text, ["mode"], "") if text is not None else 1
        raise ConfigurationError(f"{source}:{line}: mode: auto mode needs 'multiplier' or 'offset'")


def with_defaults(cfg):
    out = copy.deepcopy(cfg)
    for key, val in DEFAULTS.items():
        if isinstance(val, dict):
            merged = dict(val)
            merged.update(out.get(key, {}))
            out[key] = merged
        else:
            out.setdefault(key, val)
    return out


def loads(text, source="<config>"):
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    validate(cfg, text, source)
    return with_defaults(cfg)


def load(spec):
    """Load a config from a file path or a preset name."""
    path = Path(spec)
    if path.is_file():
        return loads(path.read_text(), str(path))
    if spec in preset_names():
        res = resources.files("fkquasi.presets").joinpath(f"{spec}.json")
        return loads(res.read_text(), f"preset:{spec}")
    raise ConfigurationError(f"{spec}:1: no such config file or preset (presets: {', '.join(preset_names())})")
