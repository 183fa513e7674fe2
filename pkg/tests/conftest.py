import functools

import numpy as np
import pytest

from memaug.augmentation import augment
from memaug.environments import (
    build_four_action_recall,
    build_gravity,
    build_hallway,
    build_recall,
    build_variant_recall,
)
from memaug.pomdp import TabularPomdp


@functools.lru_cache(maxsize=None)
def cached_env(name: str):
    builders = {
        "gravity": build_gravity,
        "recall": build_recall,
        "variant_recall": build_variant_recall,
        "four_action_recall": build_four_action_recall,
        "hallway_cookie": lambda: build_hallway("cookie"),
        "hallway_keys": lambda: build_hallway("keys"),
    }
    return builders[name]()


@functools.lru_cache(maxsize=None)
def cached_product(name: str, spec: str):
    return augment(cached_env(name), spec)


def identity_mdp(num_states=4, num_actions=2, discount=0.9, horizon=None, seed=0, terminal_last=False):
    """Random fully observable MDP (identity observation function)."""
    rng = np.random.default_rng(seed)
    rewards = [-1.0, 0.0, 0.5, 1.0]
    dynamics = []
    for s in range(num_states):
        rows = []
        for _ in range(num_actions):
            if terminal_last and s == num_states - 1:
                rows.append([(s, 1, 1.0)])
                continue
            probs = rng.dirichlet(np.ones(num_states))
            rows.append([(j, int(rng.integers(len(rewards))), float(p)) for j, p in enumerate(probs)])
            # renormalize against float drift
            total = sum(p for *_, p in rows[-1])
            rows[-1] = [(j, r, p / total) for j, r, p in rows[-1]]
        dynamics.append(rows)
    terminal = [False] * num_states
    if terminal_last:
        terminal[-1] = True
    mu = [1.0 / num_states] * num_states
    if terminal_last:
        mu = [1.0 / (num_states - 1)] * (num_states - 1) + [0.0]
    return TabularPomdp(
        num_states=num_states,
        num_observations=num_states,
        num_actions=num_actions,
        rewards=rewards,
        dynamics=dynamics,
        observation_fn=[[(s, 1.0)] for s in range(num_states)],
        discount=discount,
        initial_dist=mu,
        terminal=terminal,
        horizon=horizon,
        name="identity_mdp",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance outcomes, printed as one PASS/FAIL line per criterion at the end of the session
ACCEPTANCE: dict = {}


def record_acceptance(number: int, title: str, ok: bool, detail: str = ""):
    ACCEPTANCE[number] = (title, bool(ok), detail)
    print(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)
