"""The recall task and its two reward-table variants.

All three have a single observation, so every hidden state looks the same.
"""

from __future__ import annotations

from ..pomdp import TabularPomdp

# (a1, a2, a3) -> final reward, actions in {0, 1}.
VARIANT_RECALL_REWARDS = {
    (0, 0, 0): 0.0, (0, 0, 1): 2.0, (0, 1, 0): 3.0, (0, 1, 1): 1.0,
    (1, 0, 0): -100.0, (1, 0, 1): -100.0, (1, 1, 0): -10.0, (1, 1, 1): -10.0,
}

# r[a1][a2] for the 4-action, 2-step task.
FOUR_ACTION_REWARDS = (
    (-5.0, 0.5, 1.0, 0.5),
    (0.0, 0.5, -0.5, 0.75),
    (0.0, 0.5, -5.0, 0.5),
    (0.0, 0.5, -5.0, 0.5),
)


def _tree_pomdp(num_actions, depth, final_reward, discount, name, action_labels):
    """Deterministic history tree: one state per action prefix plus a terminal sink.

    ``final_reward(prefix)`` gives the reward of the last action of a full prefix.
    """
    prefixes = [()]
    level = [()]
    for _ in range(depth - 1):
        level = [p + (a,) for p in level for a in range(num_actions)]
        prefixes.extend(level)
    index = {p: i for i, p in enumerate(prefixes)}
    terminal_state = len(prefixes)
    values = sorted({0.0} | {float(final_reward(p + (a,))) for p in level for a in range(num_actions)})
    ridx = {v: i for i, v in enumerate(values)}

    dynamics = []
    for p in prefixes:
        row = []
        for a in range(num_actions):
            if len(p) == depth - 1:
                row.append([(terminal_state, ridx[float(final_reward(p + (a,)))], 1.0)])
            else:
                row.append([(index[p + (a,)], ridx[0.0], 1.0)])
        dynamics.append(row)
    dynamics.append([[(terminal_state, ridx[0.0], 1.0)] for _ in range(num_actions)])

    n = terminal_state + 1
    mu = [0.0] * n
    mu[0] = 1.0
    labels = ["s*" if not p else "s" + "".join(map(str, p)) for p in prefixes] + ["end"]
    return TabularPomdp(
        num_states=n,
        num_observations=1,
        num_actions=num_actions,
        rewards=values,
        dynamics=dynamics,
        observation_fn=[[(0, 1.0)]] * n,
        discount=discount,
        initial_dist=mu,
        terminal=[False] * terminal_state + [True],
        horizon=depth,
        name=name,
        state_labels=labels,
        observation_labels=["o"],
        action_labels=action_labels,
    )


def build_recall(discount: float = 0.95) -> TabularPomdp:
    """Three actions, three steps; reward 1 iff the agent plays ``a1, a2, a3`` in order.

    Hidden states track only progress: ``start``, ``(t, on-track)`` and
    ``(t, off-track)`` for t = 1, 2, and a terminal sink.
    """
    labels = ["start", "1ok", "1bad", "2ok", "2bad", "end"]
    START, OK1, BAD1, OK2, BAD2, END = range(6)
    rewards = [0.0, 1.0]
    dyn = [
        [[(OK1, 0, 1.0)], [(BAD1, 0, 1.0)], [(BAD1, 0, 1.0)]],
        [[(BAD2, 0, 1.0)], [(OK2, 0, 1.0)], [(BAD2, 0, 1.0)]],
        [[(BAD2, 0, 1.0)]] * 3,
        [[(END, 0, 1.0)], [(END, 0, 1.0)], [(END, 1, 1.0)]],
        [[(END, 0, 1.0)]] * 3,
        [[(END, 0, 1.0)]] * 3,
    ]
    return TabularPomdp(
        num_states=6,
        num_observations=1,
        num_actions=3,
        rewards=rewards,
        dynamics=dyn,
        observation_fn=[[(0, 1.0)]] * 6,
        discount=discount,
        initial_dist=[1.0, 0, 0, 0, 0, 0],
        terminal=[False] * 5 + [True],
        horizon=3,
        name="recall",
        state_labels=labels,
        observation_labels=["o"],
        action_labels=["a1", "a2", "a3"],
    )


def build_variant_recall(scale: float = 1.0) -> TabularPomdp:
    """Two actions, three steps, gamma = 1, final reward from :data:`VARIANT_RECALL_REWARDS`."""
    return _tree_pomdp(
        2, 3, lambda p: scale * VARIANT_RECALL_REWARDS[p], 1.0, "variant_recall", ["0", "1"]
    )


def build_four_action_recall(scale: float = 1.0) -> TabularPomdp:
    """Four actions, two steps, gamma = 1, final reward ``r[a1][a2]``.

    States: ``s*`` (index 0), ``s0..s3`` (indices 1-4, reached by the first
    action) and the terminal sink.  ``scale`` multiplies every reward.
    """
    return _tree_pomdp(
        4, 2, lambda p: scale * FOUR_ACTION_REWARDS[p[0]][p[1]], 1.0, "four_action_recall",
        ["0", "1", "2", "3"],
    )
