"""Run configuration: JSON schema, semantic checks and object construction."""
from __future__ import annotations

import copy
import json
import math
from pathlib import Path

import jsonschema

from .microstructure import Bounds, LaminateSpec, MicrostructureError, Phase, PhaseTable

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unreadable configuration (CLI exit code 2)."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int_pos = {"type": "integer", "minimum": 1}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_dims = {"type": "array", "items": _int_pos, "minItems": 3, "maxItems": 3}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "chiralhom run configuration",
    "type": "object",
    "required": ["phases", "probabilities"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "description": {"type": "string"},
        "phases": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["a"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "a": _pos,
                    "kappa": _num,
                    "m_sat": {"type": "number", "minimum": 0},
                    "k1": {"type": "number", "minimum": 0},
                    "easy_axis": _vec3,
                },
            },
        },
        "probabilities": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "bounds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"c_ex": _pos, "C_ex": _pos, "C_dmi": _pos, "C_sat": _pos},
        },
        "laminate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "widths": {"type": "array", "items": _pos, "minItems": 1},
                "width_law": {"enum": ["fixed", "exponential"]},
            },
        },
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "mu0": _pos,
        "h_applied": _vec3,
        "output_dir": {"type": "string"},
        "laminate_validation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_layers": _int_pos,
                "cells_per_layer": _int_pos,
                "nxy": {"type": "array", "items": _int_pos, "minItems": 2, "maxItems": 2},
                "h": _pos,
                "n_periods": _int_pos,
                "tol": _pos,
                "rel_tol": _pos,
            },
        },
        "correctors": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "microstructure": {"enum": ["checkerboard", "laminate"]},
                "dims": _dims,
                "cell_size": _pos,
                "n_layers": _int_pos,
                "cells_per_layer": _int_pos,
                "tol": _pos,
                "max_iter": _int_pos,
                "size_ladder": {"type": "array", "items": _int_pos},
            },
        },
        "helix": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "length": _pos,
                "n_cells": {"type": "integer", "minimum": 2},
                "grad_tol": _pos,
                "max_iters": _int_pos,
                "sigma": _pos,
                "pitch_tol": _pos,
                "energy_tol": _pos,
                "out_of_plane_tol": _pos,
            },
        },
        "gamma_sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "length": _pos,
                "n_cells": {"type": "integer", "minimum": 2},
                "eps": {"type": "array", "items": _pos, "minItems": 1},
                "exponents": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                "grad_tol": _pos,
                "max_iters": _int_pos,
                "sigma": _pos,
                "gap_tol": _pos,
                "max_inversions": {"type": "integer", "minimum": 0},
                "periodic_anchor": {"type": "boolean"},
            },
        },
        "birkhoff": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_seeds": {"type": "integer", "minimum": 1},
                "windows": {"type": "array", "items": _pos, "minItems": 1},
                "envelope": _pos,
            },
        },
        "energy_eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dims": _dims,
                "h": _pos,
                "eps": _pos,
                "microstructure": {"enum": ["laminate", "checkerboard"]},
                "cell_size": _pos,
                "magnetization": {"type": "string"},
                "q": _num,
                "padding": {"type": "integer", "minimum": 2},
                "rve_dims": _dims,
            },
        },
    },
}

DEFAULTS = {
    "mu0": 1.0,
    "h_applied": [0.0, 0.0, 0.0],
    "seeds": [0, 1, 2, 3, 4],
    "laminate": {"width_law": "fixed"},
    "laminate_validation": {
        "n_layers": 36,
        "cells_per_layer": 2,
        "nxy": [2, 3],
        "h": 0.5,
        "n_periods": 8,
        "tol": 1e-13,
        "rel_tol": 1e-10,
    },
    "correctors": {
        "microstructure": "checkerboard",
        "dims": [16, 16, 16],
        "cell_size": 1.0,
        "n_layers": 32,
        "cells_per_layer": 2,
        "tol": 1e-10,
        "size_ladder": [4, 8],
    },
    "helix": {
        "length": 64.0,
        "n_cells": 512,
        "grad_tol": 1e-4,
        "max_iters": 50000,
        "sigma": 1.0,
        "pitch_tol": 0.02,
        "energy_tol": 0.01,
        "out_of_plane_tol": 0.02,
    },
    "gamma_sweep": {
        "length": 64.0,
        "n_cells": 8192,
        "exponents": [3, 4, 5, 6, 7],
        "grad_tol": 1e-3,
        "max_iters": 20000,
        "sigma": 1.0,
        "gap_tol": 0.05,
        "max_inversions": 1,
        "periodic_anchor": True,
    },
    "birkhoff": {"n_seeds": 20, "windows": [10.0, 100.0, 1000.0, 10000.0], "envelope": 5.0},
    "energy_eval": {
        "dims": [4, 4, 4],
        "h": 0.25,
        "eps": 1.0,
        "microstructure": "checkerboard",
        "cell_size": 1.0,
        "magnetization": "random",
        "q": 0.25,
        "padding": 2,
        "rve_dims": [8, 8, 8],
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(raw: dict) -> dict:
    """Schema plus semantic validation; returns the config with defaults filled in."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    n = len(cfg["phases"])
    p = cfg["probabilities"]
    if len(p) != n:
        raise ConfigError(f"{n} phases but {len(p)} probabilities")
    if abs(math.fsum(p) - 1.0) > 1e-12:
        raise ConfigError(f"probabilities sum to {math.fsum(p)!r}, expected 1")
    widths = cfg["laminate"].setdefault("widths", [1.0] * n)
    if len(widths) != n:
        raise ConfigError(f"{n} phases but {len(widths)} laminate widths")
    gs = cfg["gamma_sweep"]
    if "eps" in raw.get("gamma_sweep", {}):
        eps = gs["eps"]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("gamma_sweep.eps must be strictly decreasing")
    elif any(b <= a for a, b in zip(gs["exponents"], gs["exponents"][1:])):
        raise ConfigError("gamma_sweep.exponents must be strictly increasing")
    w = cfg["birkhoff"]["windows"]
    if any(b <= a for a, b in zip(w, w[1:])):
        raise ConfigError("birkhoff.windows must be strictly increasing")
    if len(set(cfg["seeds"])) != len(cfg["seeds"]):
        raise ConfigError("seeds must be distinct")
    try:
        build_table(cfg)
    except MicrostructureError as exc:
        raise ConfigError(f"invalid phase data: {exc}") from None
    return cfg


def load(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return validate(raw)


def build_table(cfg: dict) -> PhaseTable:
    b = cfg.get("bounds", {})
    bounds = Bounds(**b) if b else Bounds()
    phases = [
        Phase(
            a=float(ph["a"]),
            kappa=float(ph.get("kappa", 0.0)),
            m_sat=float(ph.get("m_sat", 0.0)),
            k1=float(ph.get("k1", 0.0)),
            easy_axis=tuple(ph.get("easy_axis", (0.0, 0.0, 1.0))),
            bounds=bounds,
        )
        for ph in cfg["phases"]
    ]
    return PhaseTable(tuple(phases), tuple(float(x) for x in cfg["probabilities"]))


def build_laminate_spec(cfg: dict) -> LaminateSpec:
    lam = cfg["laminate"]
    return LaminateSpec(build_table(cfg), tuple(lam["widths"]), width_law=lam.get("width_law", "fixed"))


def eps_list(cfg: dict) -> list[float]:
    gs = cfg["gamma_sweep"]
    if "eps" in gs:
        return [float(e) for e in gs["eps"]]
    return [gs["length"] / 2.0**k for k in gs["exponents"]]
