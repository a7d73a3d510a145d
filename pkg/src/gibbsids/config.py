"""Experiment configuration files.

Plain-text ``[section]`` blocks of ``key = value`` lines; ``#`` starts a
comment, arrays are space-separated. Every key is typed and validated against
the schema below; unknown sections and keys are errors.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

REQUIRED = object()

EXPERIMENTS = {
    "poisson-ids": ("IDS of a Poisson-driven potential with the Pastur ordinate fit",
                    ["potential", "geometry.L", "geometry.h", "sampler.replicas", "grid"]),
    "strauss-ids": ("IDS under a Strauss process with the quadratic ordinate fit",
                    ["model.a", "model.R", "potential", "geometry.L", "geometry.h", "sampler.replicas", "grid"]),
    "hardcore-floor": ("sampled potentials and IDS stay above the packing-derived floor for a hardcore process",
                       ["model.R", "potential", "geometry.L", "geometry.h", "sampler.replicas", "grid"]),
    "tail-sandwich": ("empirical count law between the explicit lower and upper tail bounds",
                      ["model", "window.lower", "window.upper", "sampler.samples"]),
    "laplace-bound": ("Monte Carlo Laplace functional against the t^2 coefficient bound on a cell layout",
                      ["model.a", "model.R", "window.cells", "window.v", "schedule.t"]),
    "intlem-scan": ("Gaussian lattice sum against its exponential bound along a t grid",
                    ["intlem.c", "intlem.v", "intlem.eps", "intlem.t_min", "intlem.t_max"]),
    "norm-S": ("separated-packing norm by lattice branch-and-bound",
               ["potential", "packing.S", "packing.radius", "packing.resolution"]),
    "upper2-scan": ("staircase norms on eroded windows against the continuum norm",
                    ["potential", "packing.S", "packing.radius", "packing.b", "packing.n"]),
    "weak-budget": ("weak-interaction budgets and their decay along x",
                    ["model", "weak.x"]),
}

KINDS = tuple(EXPERIMENTS)

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "experiment": {"kind": ("str", REQUIRED), "seed": ("int", REQUIRED), "description": ("str", "")},
    "model": {
        "phi": ("str", "none"),  # none | strauss | hardcore | softshell | tabulated | area
        "a": ("float", 1.0),
        "R": ("float", 1.0),
        "p": ("float", 1.0),
        "knots": ("floats", None),  # r0 v0 r1 v1 ...
        "z": ("float", 1.0),
    },
    "potential": {
        "shape": ("str", "triangular"),  # triangular | cosine | tabulated
        "depth": ("float", 1.0),
        "radius": ("float", 1.0),
        "knots": ("floats", None),
    },
    "geometry": {"d": ("int", 1), "L": ("float", 16.0), "h": ("float", 0.0625), "padding": ("float", 0.0)},
    "sampler": {
        "burn_in": ("int", None),
        "thinning": ("int", 200),
        "replicas": ("int", 200),
        "chains": ("int", 4),
        "samples": ("int", 100000),
    },
    "grid": {
        "lambdas": ("floats", None),
        "lambda_min": ("float", None),
        "lambda_max": ("float", None),
        "lambda_num": ("int", None),
    },
    "schedule": {"t": ("floats", None), "eps": ("float", 0.2)},
    "fit": {"window": ("floats", None), "tolerance_factor": ("float", 2.0), "max_spread": ("float", 0.5),
            "max_rel_ci": ("float", 0.5)},
    "window": {"lower": ("floats", None), "upper": ("floats", None), "cells": ("floats", None),
               "v": ("floats", None), "n_max": ("int", 6), "min_hits": ("int", 30)},
    "packing": {"S": ("str", "ball"), "radius": ("floats", None), "resolution": ("floats", None),
                "b": ("float", None), "n": ("ints", None), "floor_cells": ("int", 64)},
    "intlem": {"c": ("float", 1.0), "v": ("floats", None), "edges": ("str", ""), "eps": ("floats", None),
               "t_min": ("float", None), "t_max": ("float", None), "t_num": ("int", 60),
               "verify_points": ("int", 40)},
    "weak": {"x": ("floats", None), "n_factor": ("float", 1.1), "d": ("int", 1)},
}


class ConfigError(ValueError):
    pass


def _convert(kind: str, raw: str, where: str):
    try:
        if kind == "str":
            return raw.strip()
        if kind == "int":
            v = float(raw)
            if v != int(v):
                raise ValueError("not an integer")
            return int(v)
        if kind == "float":
            return float(raw)
        if kind == "floats":
            vals = [float(t) for t in raw.split()]
            if not vals:
                raise ValueError("empty list")
            return vals
        if kind == "ints":
            vals = [int(t) for t in raw.split()]
            if not vals:
                raise ValueError("empty list")
            return vals
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot read {raw!r} as {kind} ({exc})") from None
    raise AssertionError(kind)


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict  # section -> key -> value (all schema keys present)
    source: str = ""

    def __getitem__(self, path: str):
        sec, key = path.split(".")
        return self.values[sec][key]

    @property
    def kind(self) -> str:
        return self.values["experiment"]["kind"]

    @property
    def seed(self) -> int:
        return self.values["experiment"]["seed"]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        vals = {s: dict(k) for s, k in self.values.items()}
        vals["experiment"]["seed"] = int(seed)
        return ExperimentConfig(vals, self.source)

    def canonical(self) -> str:
        return json.dumps(self.values, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def lambdas(self) -> np.ndarray:
        g = self.values["grid"]
        if g["lambdas"] is not None:
            return np.asarray(g["lambdas"], float)
        if None in (g["lambda_min"], g["lambda_max"], g["lambda_num"]):
            raise ConfigError("grid: give lambdas or lambda_min, lambda_max and lambda_num")
        return np.linspace(g["lambda_min"], g["lambda_max"], g["lambda_num"])


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                   interpolation=None, strict=True)
    cp.optionxform = str  # keep key case (L, R, S)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values: dict = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
            values.setdefault(sec, {})[key] = _convert(SCHEMA[sec][key][0], raw, f"{sec}.{key}")
    full = {}
    for sec, keys in SCHEMA.items():
        full[sec] = {}
        for key, (_, default) in keys.items():
            if key in values.get(sec, {}):
                full[sec][key] = values[sec][key]
            elif default is REQUIRED:
                raise ConfigError(f"missing required key {sec}.{key}")
            else:
                full[sec][key] = default
    cfg = ExperimentConfig(full, source)
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from None
    return parse_config(text, str(p))


def _need(cfg: ExperimentConfig, *paths: str):
    for path in paths:
        if cfg[path] is None:
            raise ConfigError(f"{path} is required for experiment {cfg.kind}")


def _positive(cfg: ExperimentConfig, *paths: str):
    for path in paths:
        v = cfg[path]
        vals = v if isinstance(v, list) else [v]
        if v is not None and any(not x > 0 for x in vals):
            raise ConfigError(f"{path} must be positive")


def validate(cfg: ExperimentConfig) -> None:
    kind = cfg.kind
    if kind not in EXPERIMENTS:
        raise ConfigError(f"experiment.kind: unknown experiment {kind!r} (choose from {', '.join(KINDS)})")
    if cfg["model.phi"] not in ("none", "strauss", "hardcore", "softshell", "tabulated", "area"):
        raise ConfigError(f"model.phi: unknown interaction {cfg['model.phi']!r}")
    if cfg["potential.shape"] not in ("triangular", "cosine", "tabulated"):
        raise ConfigError(f"potential.shape: unknown profile {cfg['potential.shape']!r}")
    if cfg["packing.S"] not in ("ball", "box"):
        raise ConfigError(f"packing.S: unknown window {cfg['packing.S']!r}")
    if cfg["geometry.d"] not in (1, 2, 3):
        raise ConfigError("geometry.d must be 1, 2 or 3")
    _positive(cfg, "model.a", "model.R", "model.p", "model.z", "potential.depth", "potential.radius",
              "geometry.L", "geometry.h", "sampler.thinning", "sampler.replicas", "sampler.chains",
              "sampler.samples", "packing.radius", "packing.resolution", "packing.b", "intlem.c",
              "intlem.v", "intlem.eps", "intlem.t_min", "intlem.t_max", "weak.x", "schedule.eps")
    if cfg["sampler.burn_in"] is not None and cfg["sampler.burn_in"] < 0:
        raise ConfigError("sampler.burn_in must be nonnegative")
    if kind in ("poisson-ids", "strauss-ids", "hardcore-floor"):
        cfg.lambdas()
        if cfg["geometry.h"] > cfg["potential.radius"] / 8:
            raise ConfigError("geometry.h must not exceed potential.radius / 8 (wells must be resolved)")
    if kind == "strauss-ids" and cfg["model.phi"] != "strauss":
        raise ConfigError("model.phi must be strauss for strauss-ids")
    if kind == "hardcore-floor" and cfg["model.phi"] != "hardcore":
        raise ConfigError("model.phi must be hardcore for hardcore-floor")
    if kind == "tail-sandwich":
        _need(cfg, "window.lower", "window.upper")
    if kind == "laplace-bound":
        _need(cfg, "window.cells", "window.v", "schedule.t")
        if cfg["model.phi"] != "strauss":
            raise ConfigError("model.phi must be strauss for laplace-bound")
    if kind == "intlem-scan":
        _need(cfg, "intlem.v", "intlem.eps", "intlem.t_min", "intlem.t_max")
    if kind == "norm-S":
        _need(cfg, "packing.radius", "packing.resolution")
    if kind == "upper2-scan":
        _need(cfg, "packing.radius", "packing.b", "packing.n")
    if kind == "weak-budget":
        _need(cfg, "weak.x")
        if cfg["model.phi"] not in ("area", "softshell"):
            raise ConfigError("model.phi must be area or softshell for weak-budget")
    if cfg["potential.shape"] == "tabulated":
        _need(cfg, "potential.knots")
    if cfg["model.phi"] == "tabulated":
        _need(cfg, "model.knots")
