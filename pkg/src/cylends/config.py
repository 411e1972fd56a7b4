"""Scenario configuration: JSON schema, defaults and conversion to model objects."""
from __future__ import annotations

import copy
import json
import re

import jsonschema

from .geometry import CrossSection, GeometryError, ManifoldSpec, WarpProfile

SCHEMA_VERSION = 1

STAGES = ("spectrum", "indicial", "phi", "harmonic", "bochner", "weitzenbock", "split", "dichotomy")

DEFAULT_TOLERANCES = {
    "indicial_root": 1e-9,
    "phi_gap": 1e4,
    "flux_rel": 1e-6,
    "harmonic_residual": 1e-8,
    "decay_margin": 10.0,
    "ode_rel": 1e-4,
    "bochner_c": 50.0,
    "flat_energy": 1e-10,
    "weitzenbock_c": 100.0,
    "split_c": 50.0,
    "flow_level": 1e-8,
    "constant_spread": 1e-6,
}

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "manifold": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "cross_section": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["circle", "flat_torus"]},
                        "radii": {"type": "array", "items": _pos, "minItems": 1, "maxItems": 2},
                        "mesh_points": {"type": "integer", "minimum": 8},
                    },
                },
                "warp": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["constant", "sech_bump", "cigar", "compact_bump"]},
                        "params": {"type": "array", "items": _number, "minItems": 1, "maxItems": 4},
                    },
                },
                "topology": {"enum": ["two_end_cylinder", "one_end_capped"]},
                "truncation_R": _pos,
                "grid_h": _pos,
                "core_radius": {"anyOf": [_pos, {"type": "null"}]},
            },
        },
        "weight": {"anyOf": [_number, {"type": "null"}]},
        "asymptotics": {
            "anyOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["C"],
                    "properties": {
                        "C": {"type": "array", "items": _number, "minItems": 1, "maxItems": 2},
                        "D": {"anyOf": [{"type": "array", "items": _number, "minItems": 1, "maxItems": 2},
                                        {"type": "null"}]},
                    },
                },
            ]
        },
        "auto_project": {"type": "boolean"},
        "sweeps": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "R_list": {"type": "array", "items": _pos},
                "s_list": {"type": "array", "items": _number},
            },
        },
        "stages": {"type": "array", "items": {"enum": list(STAGES)}, "uniqueItems": True},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number", "minimum": 0} for k in DEFAULT_TOLERANCES},
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "name": "scenario",
    "manifold": {
        "cross_section": {"kind": "circle", "radii": [1.0], "mesh_points": 64},
        "warp": {"kind": "constant", "params": [1.0]},
        "topology": "two_end_cylinder",
        "truncation_R": 8.0,
        "grid_h": 0.05,
        "core_radius": None,
    },
    "weight": None,
    "asymptotics": None,
    "auto_project": False,
    "sweeps": {"R_list": [5.0, 6.0, 7.0], "s_list": []},
    "stages": list(STAGES[:-1]),
    "tolerances": dict(DEFAULT_TOLERANCES),
    "seed": 0,
}


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the field and line."""


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _line_of(text: str | None, path: list) -> int | None:
    if not text or not path:
        return None
    key = next((p for p in reversed(path) if isinstance(p, str)), None)
    if key is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def validate(raw: dict, text: str | None = None) -> dict:
    """Validate a raw config and return it merged with every default.

    Raises
    ------
    ConfigError
        Schema violations (unknown keys, wrong types) or an inconsistent
        manifold description.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for e in errors:
            path = list(e.absolute_path)
            if e.validator == "additionalProperties":
                extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
                path = path + extra[:1]
            where = ".".join(map(str, path)) or "<root>"
            line = _line_of(text, path)
            lines.append(f"{where}{f' (line {line})' if line else ''}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))
    cfg = _merge(DEFAULTS, raw)
    try:
        spec = to_spec(cfg)
        spec.validate()
    except GeometryError as exc:
        raise ConfigError(f"manifold: {exc}") from exc
    asym = cfg["asymptotics"]
    if asym is not None:
        n = spec.n_ends
        if len(asym["C"]) != n or (asym.get("D") is not None and len(asym["D"]) != n):
            raise ConfigError(f"asymptotics: C and D need {n} entries (one per end)")
        asym.setdefault("D", None)
    return cfg


def load(path) -> dict:
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return validate(raw, text)


def to_spec(cfg: dict) -> ManifoldSpec:
    m = cfg["manifold"]
    cs = m["cross_section"]
    return ManifoldSpec.make(
        CrossSection(cs["kind"], tuple(float(r) for r in cs["radii"]), int(cs["mesh_points"])),
        WarpProfile(m["warp"]["kind"], tuple(float(p) for p in m["warp"]["params"])),
        m["topology"], m["truncation_R"], m["grid_h"], m["core_radius"],
    )


def builtin(name: str) -> dict:
    """The three reference models at the default resolution."""
    models = {
        "flat": {"warp": {"kind": "constant", "params": [1.0]}, "topology": "two_end_cylinder"},
        "warped": {"warp": {"kind": "sech_bump", "params": [1.0, 0.3, 0.0, 1.0]}, "topology": "two_end_cylinder"},
        "cigar": {"warp": {"kind": "cigar", "params": [1.0]}, "topology": "one_end_capped"},
    }
    if name not in models:
        raise ConfigError(f"unknown built-in scenario {name!r}")
    return validate({"name": name, "manifold": models[name]})
