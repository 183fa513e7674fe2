"""The gravity domain: a 5x5 grid with a hidden force that a button toggles.

Coordinates are ``(x, y)`` with ``y = 0`` the bottom row.  The agent starts at
the bottom-left corner with gravity on; the cookie is top-left, the button
bottom-right, and a platform wall separates rows 0 and 1 for columns 1-4, so
the only way up from the bottom row is column 0.

While gravity is on, every action becomes a downward move with probability 0.9
whenever a downward move is possible from the current cell.  Entering the button
cell toggles gravity; entering the cookie cell pays 1 and ends the episode.
"""

from __future__ import annotations

from ..pomdp import TabularPomdp

SIZE = 5
START = (0, 0)
COOKIE = (0, 4)
BUTTON = (4, 0)
SLIP = 0.9
HORIZON = 1000

UP, RIGHT, DOWN, LEFT = range(4)
ACTION_NAMES = ("up", "right", "down", "left")
_DELTA = {UP: (0, 1), RIGHT: (1, 0), DOWN: (0, -1), LEFT: (-1, 0)}


def blocked(x: int, y: int, action: int) -> bool:
    dx, dy = _DELTA[action]
    nx, ny = x + dx, y + dy
    if not (0 <= nx < SIZE and 0 <= ny < SIZE):
        return True
    # platform between rows 0 and 1, columns 1..4
    if x >= 1 and {y, ny} == {0, 1}:
        return True
    return False


def move(x: int, y: int, action: int) -> tuple[int, int]:
    if blocked(x, y, action):
        return x, y
    dx, dy = _DELTA[action]
    return x + dx, y + dy


def state_index(x: int, y: int, gravity_on: bool) -> int:
    return (0 if gravity_on else SIZE * SIZE) + y * SIZE + x


def cell_index(x: int, y: int) -> int:
    return y * SIZE + x


def decode_state(s: int) -> tuple[int, int, bool]:
    g, cell = divmod(s, SIZE * SIZE)
    y, x = divmod(cell, SIZE)
    return x, y, g == 0


def outcome_cells(x: int, y: int, gravity_on: bool, action: int) -> list[tuple[tuple[int, int], float]]:
    """Distribution over the agent's next cell."""
    intended = move(x, y, action)
    if not gravity_on or action == DOWN or blocked(x, y, DOWN):
        return [(intended, 1.0)]
    down = move(x, y, DOWN)
    if down == intended:
        return [(down, 1.0)]
    return [(down, SLIP), (intended, 1.0 - SLIP)]


def build_gravity(horizon: int = HORIZON, discount: float = 0.95) -> TabularPomdp:
    """Tabular gravity domain; hidden state = (cell, gravity flag), observation = cell."""
    n = 2 * SIZE * SIZE
    rewards = [0.0, 1.0]
    dynamics = []
    terminal = []
    labels = []
    for s in range(n):
        x, y, g = decode_state(s)
        labels.append(f"({x},{y},{'on' if g else 'off'})")
        is_cookie = (x, y) == COOKIE
        terminal.append(is_cookie)
        rows = []
        for a in range(4):
            if is_cookie:
                rows.append([(s, 0, 1.0)])
                continue
            acc = {}
            for (nx, ny), p in outcome_cells(x, y, g, a):
                ng = g
                if (nx, ny) == BUTTON and (nx, ny) != (x, y):
                    ng = not g
                r = 1 if (nx, ny) == COOKIE else 0
                key = (state_index(nx, ny, ng), r)
                acc[key] = acc.get(key, 0.0) + p
            rows.append([(ns, r, p) for (ns, r), p in acc.items()])
        dynamics.append(rows)
    mu = [0.0] * n
    mu[state_index(*START, True)] = 1.0
    observation_fn = [[(cell_index(*decode_state(s)[:2]), 1.0)] for s in range(n)]
    return TabularPomdp(
        num_states=n,
        num_observations=SIZE * SIZE,
        num_actions=4,
        rewards=rewards,
        dynamics=dynamics,
        observation_fn=observation_fn,
        discount=discount,
        initial_dist=mu,
        terminal=terminal,
        horizon=horizon,
        name="gravity",
        state_labels=labels,
        observation_labels=[f"({c % SIZE},{c // SIZE})" for c in range(SIZE * SIZE)],
        action_labels=list(ACTION_NAMES),
    )
