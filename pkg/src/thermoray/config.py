"""Experiment configs: JSON in, validated against a closed schema."""
from __future__ import annotations

import json

import jsonschema

from .geometry import (ChartFunction, ConformalSurface, ThermostatParams, homogeneous_thermostat,
                       surface_from_config, thermostat_from_config)


class ConfigError(ValueError):
    pass


class IncompatibleError(ValueError):
    """The requested check does not make sense on the configured chart or thermostat."""


IDENTITIES = ["commutators", "modified", "pestov", "pestov-int", "pestov-modified", "pestov-theta"]
# legacy spellings accepted on the command line and in configs
IDENTITY_ALIASES = {"uhlmann": "pestov-modified", "remark56": "pestov-theta"}

_number = {"type": "number"}
_function = {
    "oneOf": [
        _number,
        {"type": "object", "additionalProperties": False, "required": ["name"],
         "properties": {"kind": {"const": "analytic"}, "name": {"type": "string"},
                        "params": {"type": "object"}}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "N", "values"],
         "properties": {"kind": {"const": "grid"}, "N": {"type": "integer", "minimum": 2},
                        "values": {"type": "array"}}},
    ]
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "surface": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "chart": {"enum": ["torus", "halfplane", "plane"]},
                "Lx": {"type": "number", "exclusiveMinimum": 0},
                "Ly": {"type": "number", "exclusiveMinimum": 0},
                "phi": _function,
                "box": {"type": "array", "items": _number, "minItems": 4, "maxItems": 4},
            },
        },
        "thermostat": {
            "type": "object", "additionalProperties": False,
            "properties": {"f": _function, "stream": _function,
                           "e_scale": _number, "f_const": _number},
        },
        "identity": {"enum": IDENTITIES + sorted(IDENTITY_ALIASES)},
        "grid": {"type": "object", "additionalProperties": False,
                 "properties": {"N": {"type": "integer", "minimum": 8},
                                "kmax": {"type": "integer", "minimum": 0, "maximum": 32}}},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "T": _number,
        "warmup": {"type": "number", "minimum": 0},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "point": {"type": "array", "items": _number, "minItems": 3, "maxItems": 3},
        "kappa": _number,
        "sweep": {"enum": ["flow", "spectral", "constant"]},
        "levels": {"type": "array", "items": _number, "minItems": 3},
    },
}


def validate(cfg):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {path}: {exc.message}") from None
    return cfg


def load(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate(cfg)


def canonical_identity(name):
    return IDENTITY_ALIASES.get(name, name)


def build_surface(cfg, default_chart="torus"):
    s = dict(cfg.get("surface", {}))
    s.setdefault("chart", default_chart)
    return surface_from_config(s)


def build_params(cfg, surface):
    th = cfg.get("thermostat", {})
    if "e_scale" in th:
        if surface.chart != "halfplane":
            raise IncompatibleError("e_scale selects the homogeneous half-plane thermostat")
        return homogeneous_thermostat(th["e_scale"], th.get("f_const", 0.0))
    params = thermostat_from_config(surface, {k: v for k, v in th.items() if k in ("f", "stream")})
    if "f_const" in th:
        params = ThermostatParams(surface, params.f + ChartFunction.constant(th["f_const"]), params.stream)
    return params


__all__ = ["SCHEMA", "ConfigError", "IncompatibleError", "validate", "load", "build_surface",
           "build_params", "canonical_identity", "IDENTITIES", "IDENTITY_ALIASES", "ConformalSurface"]
