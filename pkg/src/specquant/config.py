"""Strict JSON run configuration.

One document drives every pipeline; unknown keys anywhere are errors so that
experiment records stay diffable and reproducible.  Flag overrides use dot
paths into this structure (for example window.e1).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .spectrum import DiscretizationSpec
from .symbols import GridSpec, SymbolDef, make_symbol, schrodinger_symbol, SYMBOL_CATALOG

SCHEMA_VERSION = 1

_DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "symbol": {"name": "harmonic"},
    "window": {"e1": 0.25, "e2": 0.95, "delta": 0.1},
    "hbar_list": [0.1],
    "lambda_grid": {"min": 0.15, "max": 1.1, "count": 24},
    "discretization": {
        "method": "pseudospectral",
        "box_halfwidth": 12.0,
        "grid_size": 512,
        "basis_size": 96,
        "quadrature_order": 0,
        "certify": True,
    },
    "maslov": {"cover_size": 6, "lambdas": []},
    "quasimode": {
        "contour_c": 0.2,
        "delta_scale": 0.3,
        "hbar_sweep": [0.2, 0.1, 0.05],
        "eval_points": 6,
        "n_theta": 48,
        "n_rad": 160,
    },
    "assumption_grid": {"half_width": 20.0, "n": 81, "level_count": 5},
    "tolerances": {"trace": 1e-10, "inverse_action": 1e-11, "match_radius_cap": 0.05},
    "bargmann": {"hermite_max": 5, "line_samples": 4096, "lattice_n": 161},
    "output_dir": "out",
}

_BLOCK_KEYS = {
    "symbol": {"name", "potential", "terms"},
    "lambda_grid": {"min", "max", "count", "values"},
}


@dataclass
class RunConfig:
    raw: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.raw[key]

    # -- materialized objects ------------------------------------------------

    def symbol(self) -> SymbolDef:
        doc = self.raw["symbol"]
        name = doc["name"]
        if name in SYMBOL_CATALOG:
            return SYMBOL_CATALOG[name]()
        if name == "schrodinger":
            return schrodinger_symbol(doc.get("potential", []))
        if name == "custom":
            return make_symbol(doc.get("terms", []), name="custom")
        raise ConfigError("UNKNOWN_SYMBOL", f"symbol name {name!r}")

    def lambda_grid(self) -> np.ndarray:
        doc = self.raw["lambda_grid"]
        if "values" in doc:
            return np.asarray(doc["values"], dtype=float)
        return np.linspace(doc["min"], doc["max"], int(doc["count"]))

    def window(self):
        w = self.raw["window"]
        return float(w["e1"]), float(w["e2"]), float(w["delta"])

    def discretization(self, hbar: float) -> DiscretizationSpec:
        d = self.raw["discretization"]
        return DiscretizationSpec(method=d["method"], box_halfwidth=d["box_halfwidth"],
                                  grid_size=int(d["grid_size"]), basis_size=int(d["basis_size"]),
                                  hbar=hbar, quadrature_order=int(d["quadrature_order"]))

    def assumption_grid(self) -> GridSpec:
        g = self.raw["assumption_grid"]
        return GridSpec(half_width=g["half_width"], n=int(g["n"]),
                        level_count=int(g["level_count"]))


def _merge_checked(defaults, given, path=""):
    if not isinstance(given, dict):
        raise ConfigError("BAD_CONFIG", f"expected object at {path or 'top level'}")
    out = {}
    for key, dval in defaults.items():
        full = path + key
        if key in given:
            gval = given[key]
            if full in _BLOCK_KEYS:
                if not isinstance(gval, dict):
                    raise ConfigError("BAD_CONFIG", f"expected object at {full}")
                for k in gval:
                    if k not in _BLOCK_KEYS[full]:
                        raise ConfigError("UNKNOWN_KEY", f"unknown config key '{full}.{k}'")
                if full == "lambda_grid" and "values" in gval:
                    out[key] = dict(gval)
                else:
                    block = dict(dval)
                    block.update(gval)
                    out[key] = block
            elif isinstance(dval, dict):
                out[key] = _merge_checked(dval, gval, full + ".")
            else:
                out[key] = gval
        else:
            out[key] = dval
    for key in given:
        if key not in defaults:
            raise ConfigError("UNKNOWN_KEY", f"unknown config key {path + key!r}")
    return out


def parse_config(doc: dict) -> RunConfig:
    merged = _merge_checked(_DEFAULTS, doc)
    if merged["schema"] != SCHEMA_VERSION:
        raise ConfigError("BAD_SCHEMA", f"schema {merged['schema']} != {SCHEMA_VERSION}")
    if "name" not in merged["symbol"]:
        raise ConfigError("BAD_CONFIG", "symbol block needs a name")
    lg = merged["lambda_grid"]
    if "values" not in lg and not ({"min", "max", "count"} <= set(lg)):
        raise ConfigError("BAD_CONFIG", "lambda_grid needs min/max/count or values")
    return RunConfig(raw=merged)


def load_config(path: str, overrides: dict | None = None) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError("CONFIG_NOT_FOUND", path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("BAD_CONFIG", f"invalid JSON: {exc}") from exc
    for dotted, value in (overrides or {}).items():
        _apply_override(doc, dotted, value)
    return parse_config(doc)


def _apply_override(doc: dict, dotted: str, value):
    parts = dotted.split(".")
    node = doc
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value


def parse_override_value(text: str):
    """Interpret an override token as JSON when possible, else a raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text
