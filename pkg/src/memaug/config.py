"""Experiment configuration files.

Configs are JSON objects with a required ``schema_version``.  Unknown keys are
rejected so a typo cannot silently change an experiment.

A learning run::

    {"schema_version": 1, "name": "gravity-O1", "environment": "gravity",
     "memory": "O1", "seeds": [0, 1, 2],
     "learner": {"algorithm": "q_learning", "total_steps": 1000000}}

An exact analysis::

    {"schema_version": 1, "name": "appc", "environment": "four_action_recall",
     "memory": "B1", "request": "exact_obs_q", "policy": "uniform"}
"""

from __future__ import annotations

import dataclasses
import inspect
import json
from dataclasses import dataclass, field
from pathlib import Path

from .environments import ENVIRONMENTS, make_environment
from .errors import ConfigError
from .learners import LearnerConfig
from .memories import parse_memory_spec

SCHEMA_VERSION = 1
REQUESTS = (
    "exact_obs_q",
    "idealized_improvement",
    "td_fixed_point",
    "detect_shortcuts",
    "sufficiency_report",
    "exhaustive_policy_search",
)
POLICIES = ("uniform", "blue", "pi_l")

_COMMON = {"schema_version", "name", "environment", "environment_options", "memory"}
_RUN_KEYS = _COMMON | {"learner", "seeds"}
_EXACT_KEYS = _COMMON | {
    "request", "policy", "epsilon", "max_iterations", "tol", "k_max", "max_depth", "shortcut_tol",
}
_LEARNER_KEYS = {f.name for f in dataclasses.fields(LearnerConfig)}


@dataclass(frozen=True)
class RunConfig:
    name: str
    environment: str
    memory: str
    learner: LearnerConfig
    seeds: tuple
    environment_options: dict = field(default_factory=dict)

    def build_environment(self):
        return make_environment(self.environment, **self.environment_options)


@dataclass(frozen=True)
class ExactConfig:
    name: str
    environment: str
    memory: str
    request: str
    policy: str = "uniform"
    epsilon: float = 0.05
    max_iterations: int = 10_000
    tol: float = 1e-9
    k_max: int = 3
    max_depth: int | None = None
    shortcut_tol: float = 1e-6
    environment_options: dict = field(default_factory=dict)

    def build_environment(self):
        return make_environment(self.environment, **self.environment_options)


def _check_keys(doc: dict, allowed: set, where: str = ""):
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}", f"{where}{key}")


def _require(doc: dict, key: str, kind, where: str = ""):
    if key not in doc:
        raise ConfigError("missing required key", f"{where}{key}")
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}", f"{where}{key}")
    return value


def _common(doc: dict):
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    version = doc.get("schema_version")
    if version is None:
        raise ConfigError("missing required key", "schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})", "schema_version")
    name = _require(doc, "name", str)
    if not name or any(c in name for c in "/\\") or name.startswith("."):
        raise ConfigError("name must be a plain, non-empty file name", "name")
    env = _require(doc, "environment", str)
    if env not in ENVIRONMENTS:
        raise ConfigError(f"unknown environment {env!r}", "environment")
    options = doc.get("environment_options", {})
    if not isinstance(options, dict):
        raise ConfigError("expected an object", "environment_options")
    builder = ENVIRONMENTS[env]
    try:
        params = inspect.signature(builder).parameters
    except (TypeError, ValueError):
        params = {}
    if not any(p.kind is p.VAR_KEYWORD for p in params.values()):
        for key in options:
            if key not in params:
                raise ConfigError(f"unknown option {key!r} for {env}", f"environment_options.{key}")
    memory = _require(doc, "memory", str)
    parse_memory_spec(memory)
    return name, env, memory, dict(options)


def _learner(doc) -> LearnerConfig:
    if not isinstance(doc, dict):
        raise ConfigError("expected an object", "learner")
    _check_keys(doc, _LEARNER_KEYS, "learner.")
    try:
        return LearnerConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc), "learner") from None


def _seeds(value) -> tuple:
    if not isinstance(value, list):
        raise ConfigError("expected a list of integers", "seeds")
    if not value:
        raise ConfigError("seed list is empty", "seeds")
    for i, seed in enumerate(value):
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seeds must be non-negative integers", f"seeds[{i}]")
    if len(set(value)) != len(value):
        raise ConfigError("duplicate seeds", "seeds")
    return tuple(value)


def parse_run_config(doc: dict) -> RunConfig:
    name, env, memory, options = _common(doc)
    _check_keys(doc, _RUN_KEYS)
    learner = _learner(_require(doc, "learner", dict))
    seeds = _seeds(doc.get("seeds"))
    return RunConfig(name, env, memory, learner, seeds, options)


def parse_exact_config(doc: dict) -> ExactConfig:
    name, env, memory, options = _common(doc)
    _check_keys(doc, _EXACT_KEYS)
    request = _require(doc, "request", str)
    if request not in REQUESTS:
        raise ConfigError(f"unknown request {request!r} (expected one of {', '.join(REQUESTS)})", "request")
    kwargs = {}
    if "policy" in doc:
        policy = _require(doc, "policy", str)
        if policy not in POLICIES:
            raise ConfigError(f"unknown policy {policy!r}", "policy")
        kwargs["policy"] = policy
    for key, kind in (("epsilon", float), ("tol", float), ("shortcut_tol", float)):
        if key in doc:
            kwargs[key] = _require(doc, key, kind)
    for key in ("max_iterations", "k_max"):
        if key in doc:
            kwargs[key] = _require(doc, key, int)
    if doc.get("max_depth") is not None:
        kwargs["max_depth"] = _require(doc, "max_depth", int)
    if "epsilon" in kwargs and not 0 < kwargs["epsilon"] <= 1:
        raise ConfigError("epsilon must be in (0, 1]", "epsilon")
    return ExactConfig(name, env, memory, request, environment_options=options, **kwargs)


def load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (line {exc.lineno})", str(path)) from None
