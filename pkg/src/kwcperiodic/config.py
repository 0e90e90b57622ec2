"""Run configuration: schema, defaults, overrides, validation and hashing.

Configs are YAML (JSON is accepted too, being a YAML subset).  Sections::

    grid:        {dim, cells, extents}
    model:       {kappa, M0, nu0, delta_star, alpha, alpha0, g}
    scheme:      {T, m, nu, eps, L, newton_tol, cg_tol, fp_tol, ...}
    forcing:     {u: waveform, v: waveform, R0: optional override}
    seed_state:  {kind: constant | random | file, ...}
    options:     per-command settings (refine, mosco, dependence)

Coefficient families are given as ``{family: name, <params>}``; waveforms as
``{kind: constant | sinusoid | tabulated, <params>}``.
"""
import copy
import hashlib
import json
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .forcing import in_class_Z, make_waveform
from .functionals import ModelParams, SchemeParams
from .grid import Grid
from .problem import Problem
from .stepper import State

DEFAULTS = {
    "grid": {"dim": 1, "cells": [32], "extents": [1.0]},
    "model": {
        "kappa": 1.0, "M0": 1.0, "nu0": 0.0, "delta_star": 0.1,
        "alpha": {"family": "quadratic", "c": 1.0},
        "alpha0": {"family": "quadratic", "c": 1.0},
        "g": {"family": "linear", "slope": 1.0},
    },
    "scheme": {"T": 1.0, "m": 32, "nu": 0.5, "eps": 0.1, "L": 1.0},
    "forcing": {
        "u": {"kind": "constant", "value": 0.0},
        "v": {"kind": "constant", "value": 0.0},
        "R0": None,
    },
    "seed_state": {"kind": "constant", "eta": 0.0, "theta": 0.0},
    "options": {
        "refine": {"plan": "default", "levels": 4, "m_base": 16, "m_cap": 128, "workers": 1},
        "mosco": {"sequences": 20, "levels": 8, "rng_seed": 0, "eps_lim": 0.0},
        "dependence": {"deltas": [0.25, 0.125, 0.0625, 0.03125], "mode": 1},
    },
}

_SCHEME_KEYS = set(SchemeParams.__dataclass_fields__)


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in (extra or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def parse_override(text):
    """``"a.b.c=VALUE"`` -> ``(["a", "b", "c"], parsed VALUE)``; VALUE is read as YAML."""
    if "=" not in text:
        raise ConfigError([("config", f"override {text!r} is not KEY=VALUE")])
    key, raw = text.split("=", 1)
    path = [k for k in key.strip().split(".") if k]
    if not path:
        raise ConfigError([("config", f"override {text!r} has an empty key")])
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError([("config", f"override {text!r}: {exc}")]) from None
    return path, value


def apply_override(cfg, path, value):
    node = cfg
    for key in path[:-1]:
        if not isinstance(node.get(key), dict):
            node[key] = {}
        node = node[key]
    node[path[-1]] = value
    return cfg


def load_config(path=None, overrides=(), seed=None):
    """Defaults, then the file at ``path``, then ``--override`` items, then ``--seed``."""
    user = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError([("config", f"cannot read {path}: {exc}")]) from None
        try:
            user = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError([("config", f"cannot parse {path}: {exc}")]) from None
        if not isinstance(user, dict):
            raise ConfigError([("config", f"{path} must contain a mapping")])
    cfg = _merge(DEFAULTS, user)
    for item in overrides:
        apply_override(cfg, *parse_override(item))
    if seed is not None:
        cfg["seed_state"]["rng_seed"] = int(seed)
        cfg["options"]["mosco"]["rng_seed"] = int(seed)
    return cfg


def config_hash(cfg):
    """sha256 of the canonical JSON form; equal configs give equal hashes."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# building objects
# ---------------------------------------------------------------------------

def build_grid(spec):
    dim = int(spec.get("dim", 1))
    cells = spec.get("cells", [32])
    extents = spec.get("extents", [1.0])
    cells = [cells] * dim if np.isscalar(cells) else list(cells)
    extents = [extents] * dim if np.isscalar(extents) else list(extents)
    if dim not in (1, 2) or len(cells) != dim or len(extents) != dim:
        raise ConfigError([("grid", f"need dim in (1, 2) with matching cells/extents, "
                                    f"got dim={dim}, cells={cells}, extents={extents}")])
    try:
        return Grid.uniform(tuple(int(c) for c in cells), tuple(float(e) for e in extents))
    except ValueError as exc:
        raise ConfigError([("grid", str(exc))]) from None


def build_model(spec):
    try:
        return ModelParams.from_descriptors(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError([("model", str(exc))]) from None


def build_scheme(spec):
    unknown = set(spec) - _SCHEME_KEYS
    if unknown:
        raise ConfigError([("scheme", f"unknown keys {sorted(unknown)}")])
    try:
        return SchemeParams(**{k: (int(v) if k in ("m", "max_newton", "max_cg", "max_picard")
                                   else v) for k, v in spec.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError([("scheme", str(exc))]) from None


def build_seed(spec, grid):
    spec = dict(spec)
    kind = spec.pop("kind", "constant")
    if kind == "constant":
        return State(np.full(grid.shape, float(spec.get("eta", 0.0))),
                     np.full(grid.shape, float(spec.get("theta", 0.0))))
    if kind == "random":
        bound = float(spec.get("bound", 0.1))
        rng = np.random.default_rng(spec.get("rng_seed", 0))
        return State(rng.uniform(-bound, bound, grid.shape), rng.uniform(-bound, bound, grid.shape))
    if kind == "file":
        path = spec.get("path")
        try:
            with np.load(path) as data:
                eta, theta = np.asarray(data["eta"], float), np.asarray(data["theta"], float)
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError([("seed_state", f"cannot load seed from {path}: {exc}")]) from None
        if eta.shape != grid.shape or theta.shape != grid.shape:
            raise ConfigError([("seed_state", f"seed fields in {path} do not match grid "
                                              f"shape {grid.shape}")])
        return State(eta, theta)
    raise ConfigError([("seed_state", f"unknown seed kind {kind!r}")])


def build_problem(cfg):
    """Validate ``cfg`` against every assumption and return the :class:`Problem`.

    All violations are collected first, so the error names each violated
    assumption; nothing is solved here.
    """
    grid = build_grid(cfg["grid"])
    model = build_model(cfg["model"])
    scheme = build_scheme(cfg["scheme"])
    errors = []
    try:
        u = make_waveform(cfg["forcing"].get("u"))
        v = make_waveform(cfg["forcing"].get("v"))
    except (TypeError, ValueError) as exc:
        raise ConfigError([("A2", f"forcing: {exc}")]) from None
    seed = build_seed(cfg["seed_state"], grid)
    if not (np.all(np.isfinite(seed.eta)) and np.all(np.isfinite(seed.theta))):
        errors.append(("A2", "seed state must be finite"))
    R0 = cfg["forcing"].get("R0")
    problem = Problem(grid, model, scheme, u, v, seed,
                      None if R0 is None else float(R0))
    errors += problem.violations()
    if not errors:
        f = problem.forcing()
        if not in_class_Z(f.u_steps, f.v_steps, f.R0, model):
            errors.append(("A7", f"step-averaged forcing lies outside the admissible class "
                                 f"for R0={f.R0:g}"))
        if seed.sup > f.R0 * (1 + 1e-12):
            errors.append(("A7", f"seed sup-norm {seed.sup:g} exceeds R0={f.R0:g}"))
    if errors:
        raise ConfigError(errors)
    return problem
