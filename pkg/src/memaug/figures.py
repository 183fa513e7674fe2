"""Bundled experiment definitions behind ``memaug reproduce``.

Each figure writes its per-series run directories (learner figures) or traces
(exact figures) under ``<out>/<figure>/`` and one wide, plot-ready CSV per
panel with the x column first and one column per series.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from . import exact
from .artifacts import summarize, write_csv
from .config import ExactConfig, RunConfig
from .errors import ConfigError
from .harness import run_experiment
from .learners import LearnerConfig

DEFAULT_SEEDS = 30
GRAVITY_STEPS = 20_000_000
SARSA_STEPS = 5_000_000
RECALL_STEPS = 1_000_000


def _gravity(algorithm: str, total_steps: int, **kwargs) -> LearnerConfig:
    return LearnerConfig(algorithm=algorithm, total_steps=total_steps, eval_every=total_steps // 20,
                         eval_metric="reward_per_100", eval_mode="greedy", eval_steps=10_000, **kwargs)


@dataclass(frozen=True)
class LearnerSeries:
    label: str
    environment: str
    memory: str
    learner: LearnerConfig


@dataclass(frozen=True)
class ImprovementSeries:
    label: str
    environment: str
    memory: str


LEARNER_FIGURES = {
    "fig2": [
        LearnerSeries(mem, "gravity", mem, _gravity("q_learning", GRAVITY_STEPS))
        for mem in ("none", "B1", "O1", "OA1")
    ],
    "fig3": [
        LearnerSeries("OA1", "recall", "OA1",
                      LearnerConfig(algorithm="q_learning", total_steps=RECALL_STEPS, eval_every=10_000,
                                    eval_metric="episode_return", eval_mode="greedy", eval_episodes=1)),
    ],
    "fig9": [
        LearnerSeries(f"{mem}_lam{lam}", "gravity", mem, _gravity("sarsa_lambda", SARSA_STEPS, lam=lam))
        for mem, lam in (("O1", 0.5), ("B1", 0.5), ("B1", 1.0))
    ],
}

IMPROVEMENT_FIGURES = {
    "fig4": {"variant_recall": [ImprovementSeries(m, "variant_recall", m) for m in ("OA1", "OA2", "B1", "B2", "B5")]},
    "fig6": {
        "oa_family": [ImprovementSeries(m, "four_action_recall", m) for m in ("OA1", "OA2")],
        "b_family": [ImprovementSeries(m, "four_action_recall", m) for m in ("B1", "B2", "B5")],
    },
}

FIGURES = tuple(sorted(set(LEARNER_FIGURES) | set(IMPROVEMENT_FIGURES)))


def _learner_figure(fig: str, out: Path, seeds: int, jobs: int, seed_offset: int) -> list[Path]:
    series = LEARNER_FIGURES[fig]
    columns, results = [], []
    for s in series:
        cfg = RunConfig(s.label, s.environment, s.memory, s.learner, tuple(range(seeds)))
        records = run_experiment(cfg, out, jobs=jobs, seed_offset=seed_offset)
        results.append(records)
        columns.append(s.label)
    paths = []
    if fig == "fig3":
        # the figure shows individual greedy-evaluation series, so keep one column per seed
        records = results[0]
        header = ["step"] + [f"seed{r.seed}" for r in records]
        rows = [[step] + [r.metrics[i] for r in records] for i, step in enumerate(records[0].steps)]
        paths.append(write_csv(out / f"{fig}.csv", header, rows))
        return paths
    summaries = [summarize(recs) for recs in results]
    header = ["step"] + [f"{c}_{stat}" for c in columns for stat in ("median", "half_std")]
    rows = []
    for i, (step, *_rest) in enumerate(summaries[0]):
        row = [step]
        for summ in summaries:
            row += [summ[i][1], summ[i][2]]
        rows.append(row)
    paths.append(write_csv(out / f"{fig}.csv", header, rows))
    return paths


def _improvement_figure(fig: str, out: Path) -> list[Path]:
    paths = []
    for panel, series in IMPROVEMENT_FIGURES[fig].items():
        traces = []
        for s in series:
            cfg = ExactConfig(s.label, s.environment, s.memory, "idealized_improvement")
            trace = exact.idealized_improvement(cfg.build_environment(), s.memory, epsilon=cfg.epsilon,
                                                max_iterations=cfg.max_iterations, tol=cfg.tol)
            traces.append(trace.returns)
            write_csv(out / panel / s.label / "trace.csv", ["iteration", "expected_return"], trace.rows())
        length = max(len(t) for t in traces)
        # converged traces stop early; hold their final value so every series spans the x range
        rows = [[i] + [t[min(i, len(t) - 1)] for t in traces] for i in range(length)]
        paths.append(write_csv(out / f"{fig}_{panel}.csv", ["iteration"] + [s.label for s in series], rows))
    return paths


def reproduce(fig: str, out_dir, seeds: int | None = None, jobs: int = 1, seed_offset: int = 0) -> list[Path]:
    """Run the bundled experiment for ``fig`` and return the plot-ready CSV paths."""
    if fig not in FIGURES:
        raise ConfigError(f"unknown figure {fig!r} (expected one of {', '.join(FIGURES)})", "figure_id")
    if seeds is not None and seeds < 1:
        raise ConfigError("seed count must be positive", "seeds")
    out = Path(out_dir) / fig
    if fig in LEARNER_FIGURES:
        return _learner_figure(fig, out, seeds or DEFAULT_SEEDS, jobs, seed_offset)
    return _improvement_figure(fig, out)
