"""Experiment configuration files (YAML) with a strict, line-anchored schema.

A config is a mapping::

    experiment: renewal-run        # model-info | spectral-report | renewal-run
                                   # | oscillatory-check | dyadic-check
    model: ar-gaussian-2d          # catalog name, or an inline mapping
    seed: 0
    workers: 1
    output: out
    params:                        # experiment specific, see PARAM_SCHEMA
      taus: [100, 200, 400]

Inline models are ``{kind: ar, A, noise_mean, noise_cov}`` or
``{kind: chain, P, xi}``.  Unknown keys and missing required keys raise
:class:`~renewalab.errors.ConfigError` whose message carries the line number.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from . import catalog
from .errors import ConfigError
from .markov_models import ARModel, FiniteChain, Model

EXPERIMENTS = ("model-info", "spectral-report", "renewal-run", "oscillatory-check", "dyadic-check")
TOP_KEYS = {"experiment", "model", "seed", "workers", "output", "params"}
NEEDS_MODEL = {"model-info", "spectral-report", "renewal-run"}

# allowed params per experiment, with defaults
PARAM_SCHEMA: dict[str, dict[str, Any]] = {
    "model-info": {},
    "spectral-report": {"n_max": 60, "t": None, "grid_radius": 1.0, "grid_points": 9},
    "renewal-run": {"taus": [100.0, 200.0, 400.0], "n_paths": 200_000, "target": None,
                    "frak_A": None, "shift_along_m": None, "margin_sigmas": 12.0, "chunk_size": 8192,
                    "check_lattice": True, "band": [0.9, 1.1]},
    "oscillatory-check": {"suite": "all", "taus": [50.0, 100.0, 200.0, 400.0], "j_tau": 1.0e4},
    "dyadic-check": {"suite": "partition", "n_points": 100_000, "m": 2.5, "budget": 20000,
                     "magnitudes": [50.0, 100.0, 200.0, 400.0]},
}
TARGET_KEYS = {"kind", "center", "half_width", "radius"}
MODEL_KEYS = {"ar": {"kind", "A", "noise_mean", "noise_cov", "x0"}, "chain": {"kind", "P", "xi", "mu"}}


@dataclass
class ExperimentConfig:
    experiment: str
    model: Any = None
    seed: int | None = None
    workers: int = 1
    output: str = "out"
    params: dict = field(default_factory=dict)
    source: str = ""

    def build_model(self) -> Model:
        if self.model is None:
            raise ConfigError("missing required key 'model'")
        if isinstance(self.model, str):
            try:
                return catalog.model(self.model)
            except KeyError as exc:
                raise ConfigError(str(exc.args[0])) from exc
        spec = dict(self.model)
        kind = spec.pop("kind")
        if kind == "ar":
            return ARModel(A=np.asarray(spec["A"], dtype=float),
                           noise_mean=np.asarray(spec["noise_mean"], dtype=float),
                           noise_cov=np.asarray(spec["noise_cov"], dtype=float),
                           x0=None if spec.get("x0") is None else np.asarray(spec["x0"], dtype=float))
        return FiniteChain(np.asarray(spec["P"], dtype=float), np.asarray(spec["xi"], dtype=float),
                           mu=None if spec.get("mu") is None else np.asarray(spec["mu"], dtype=float))


def _line(node) -> int:
    return node.start_mark.line + 1


def _mapping(node, where: str) -> dict[str, tuple[Any, Any]]:
    """``key -> (key node, value node)`` for a YAML mapping node."""
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"line {_line(node)}: {where} must be a mapping")
    out = {}
    for k, v in node.value:
        key = k.value
        if key in out:
            raise ConfigError(f"line {_line(k)}: duplicate key '{key}'")
        out[key] = (k, v)
    return out


def _check_keys(entries: dict, allowed, where: str) -> None:
    for key, (knode, _) in entries.items():
        if key not in allowed:
            raise ConfigError(f"line {_line(knode)}: unknown key '{key}' in {where}")


def _value(node):
    return yaml.safe_load(yaml.serialize(node))


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        return _parse(text, source)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _parse(text: str, source: str) -> ExperimentConfig:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(str(exc)) from exc
    if root is None:
        raise ConfigError(f"line 1: empty config, missing required key 'experiment'")
    top = _mapping(root, "the config")
    _check_keys(top, TOP_KEYS, "the config")
    if "experiment" not in top:
        raise ConfigError(f"line {_line(root)}: missing required key 'experiment'")
    exp_node = top["experiment"][1]
    experiment = _value(exp_node)
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"line {_line(exp_node)}: unknown experiment '{experiment}'")
    if experiment in NEEDS_MODEL and "model" not in top:
        raise ConfigError(f"line {_line(root)}: missing required key 'model'")
    cfg = ExperimentConfig(experiment=experiment, source=source)
    if "model" in top:
        mnode = top["model"][1]
        if isinstance(mnode, yaml.MappingNode):
            entries = _mapping(mnode, "model")
            if "kind" not in entries:
                raise ConfigError(f"line {_line(mnode)}: missing required key 'kind' in model")
            kind = _value(entries["kind"][1])
            if kind not in MODEL_KEYS:
                raise ConfigError(f"line {_line(entries['kind'][1])}: unknown model kind '{kind}'")
            _check_keys(entries, MODEL_KEYS[kind], "model")
            required = {"ar": ("A", "noise_mean", "noise_cov"), "chain": ("P", "xi")}[kind]
            for key in required:
                if key not in entries:
                    raise ConfigError(f"line {_line(mnode)}: missing required key '{key}' in model")
        cfg.model = _value(mnode)
    for key in ("seed", "workers", "output"):
        if key in top:
            setattr(cfg, key, _value(top[key][1]))
    schema = PARAM_SCHEMA[experiment]
    params = {k: v for k, v in schema.items()}
    if "params" in top:
        pnode = top["params"][1]
        entries = _mapping(pnode, "params")
        _check_keys(entries, schema, f"params of {experiment}")
        if "target" in entries:
            _check_keys(_mapping(entries["target"][1], "target"), TARGET_KEYS, "target")
        params.update({k: _value(v) for k, (_, v) in entries.items()})
    cfg.params = params
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, source=path)


def default_config(experiment: str) -> ExperimentConfig:
    """Config used when a subcommand runs without ``-c``."""
    model = {"model-info": "ar-gaussian-2d", "spectral-report": "chain-3state-2d",
             "renewal-run": "ar-gaussian-2d"}.get(experiment)
    return ExperimentConfig(experiment=experiment, model=model, params=dict(PARAM_SCHEMA[experiment]),
                            source="<defaults>")
