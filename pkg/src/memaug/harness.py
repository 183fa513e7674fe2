"""Experiment execution behind the command line: learner sweeps and exact analyses."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import exact
from .artifacts import write_csv, write_json, summarize
from .augmentation import augment
from .config import ExactConfig, RunConfig
from .learners import RunRecord, run_learner

log = logging.getLogger(__name__)


def _run_seed(cfg: RunConfig, seed: int) -> RunRecord:
    product = augment(cfg.build_environment(), cfg.memory)
    _, record = run_learner(product, cfg.learner, seed)
    return record


def run_experiment(cfg: RunConfig, out_dir, jobs: int = 1, seed_offset: int = 0) -> list[RunRecord]:
    """Train one learner per seed; write ``run_seed<k>.csv`` files and ``summary.csv``.

    Records are merged in seed order whatever the degree of parallelism.
    """
    seeds = [s + seed_offset for s in cfg.seeds]
    # build once up front so capacity problems surface before any work starts
    augment(cfg.build_environment(), cfg.memory)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_seed, [cfg] * len(seeds), seeds))
    else:
        records = [_run_seed(cfg, seed) for seed in seeds]
    target = Path(out_dir) / cfg.name
    for rec in records:
        write_csv(target / f"run_seed{rec.seed}.csv", ["step", "metric"], zip(rec.steps, rec.metrics))
    write_csv(target / "summary.csv", ["step", "median", "half_std", "n_seeds"], summarize(records))
    log.info("%s: %d runs written to %s", cfg.name, len(records), target)
    return records


def _q_doc(product, q: np.ndarray, visited=None) -> dict:
    doc = {
        "observations": list(product.observation_labels or range(product.num_observations)),
        "actions": list(product.action_labels or range(product.num_actions)),
        "q": q.tolist(),
    }
    if visited is not None:
        doc["visited"] = [bool(v) for v in visited]
    return doc


def _policy(cfg: ExactConfig, product):
    return exact.NAMED_POLICIES[cfg.policy](product)


def run_exact(cfg: ExactConfig, out_dir) -> dict:
    """Dispatch one exact-analysis request and write its artifacts; returns the JSON document."""
    env = cfg.build_environment()
    target = Path(out_dir) / cfg.name
    request = cfg.request

    if request == "sufficiency_report":
        model = env if cfg.memory == "none" else augment(env, cfg.memory)
        report = exact.sufficiency_report(model, max_depth=cfg.max_depth, k_max=cfg.k_max)
        doc = report.to_dict()
        write_json(target / "sufficiency.json", doc)
        return doc

    if request == "idealized_improvement":
        trace = exact.idealized_improvement(env, cfg.memory, epsilon=cfg.epsilon,
                                            max_iterations=cfg.max_iterations, tol=cfg.tol)
        write_csv(target / "trace.csv", ["iteration", "expected_return"], trace.rows())
        doc = {
            "environment": cfg.environment,
            "memory": cfg.memory,
            "iterations": trace.iterations,
            "converged": trace.converged,
            "label": trace.label,
            "final_return": trace.final_return,
            "optimal_value": trace.optimal_value,
            "final_policy": trace.final_policy.tolist(),
        }
        write_json(target / "trace.json", doc)
        return doc

    product = augment(env, cfg.memory)
    if request == "exhaustive_policy_search":
        result = exact.exhaustive_policy_search(product)
        doc = {
            "value": result.value,
            "episode_return": result.episode_return,
            "actions": [int(a) for a in result.policy.table.argmax(axis=1)],
        }
        write_json(target / "policy_search.json", doc)
        return doc

    policy = _policy(cfg, product)
    if request == "exact_obs_q":
        ev = exact.evaluate(product, policy)
        doc = _q_doc(product, ev.q.values, ev.occupancy.visited)
        doc["value"] = ev.value
        write_json(target / "q_values.json", doc)
        return doc
    if request == "td_fixed_point":
        doc = _q_doc(product, exact.td_fixed_point(product, policy).values)
        write_json(target / "td_q_values.json", doc)
        return doc
    if request == "detect_shortcuts":
        found = exact.detect_shortcuts(product, policy, cfg.shortcut_tol)
        doc = {
            "shortcuts": [s.to_dict(product) for s in found],
            "argmax_flips": [s.to_dict(product) for s in found if s.flips_argmax],
        }
        write_json(target / "shortcuts.json", doc)
        return doc
    raise AssertionError(f"unhandled request {request}")

