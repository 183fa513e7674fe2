"""Hallway domains: a yellow room, a corridor and two side rooms (red, blue).

Layout (x to the right, y up)::

    red    x 9..13, y 8..12   opening (11,8) <-> (11,7)
    hall   x 5..11, y 7       opening (5,7)  <-> (4,7)
    yellow x 0..4,  y 5..9
    blue   x 9..13, y 2..6    opening (11,6) <-> (11,7)

Any other step between regions hits a wall.  Moves succeed with probability
0.95; otherwise the agent stays put.  The agent only sees the room it is in:
its region, its cell inside the region and that room's dynamic contents.

``cookie`` variant: entering the button cell in the yellow room places a cookie
in the red or blue room with probability 1/2 each, replacing any cookie
already out.  Entering the cookie's cell eats it for +1.

``keys`` variant: two locked doors sit in series at the yellow end of the
corridor; the coffee machine is in the yellow room.  Two keys start in the
red/blue rooms (each key independently in either).  The agent carries at most
one key; stepping onto a key while carrying one does nothing.  Stepping into a
locked door while carrying a key uses the key and opens the door.  Reaching the
coffee pays +1, moves the agent back to the middle of the corridor, relocks
both doors and scatters the keys again.
"""

from __future__ import annotations

from collections import deque
from itertools import product

from ..errors import UsageError
from ..pomdp import TabularPomdp

SLIP = 0.05
HORIZON = 10_000

UP, RIGHT, DOWN, LEFT = range(4)
ACTION_NAMES = ("up", "right", "down", "left")
_DELTA = {UP: (0, 1), RIGHT: (1, 0), DOWN: (0, -1), LEFT: (-1, 0)}

YELLOW, HALL, RED, BLUE = "yellow", "hall", "red", "blue"
REGIONS = {
    YELLOW: [(x, y) for y in range(5, 10) for x in range(0, 5)],
    HALL: [(x, 7) for x in range(5, 12)],
    RED: [(x, y) for y in range(8, 13) for x in range(9, 14)],
    BLUE: [(x, y) for y in range(2, 7) for x in range(9, 14)],
}
REGION_OF = {cell: name for name, cells in REGIONS.items() for cell in cells}
LOCAL_INDEX = {cell: i for cells in REGIONS.values() for i, cell in enumerate(cells)}
OPENINGS = {
    frozenset({(4, 7), (5, 7)}),
    frozenset({(11, 7), (11, 8)}),
    frozenset({(11, 7), (11, 6)}),
}

MID_HALL = (8, 7)
BUTTON = (0, 9)
COOKIE_CELL = {RED: (11, 10), BLUE: (11, 4)}
DOORS = ((6, 7), (5, 7))  # first door met when walking from the middle of the corridor
COFFEE = (0, 7)
KEY_SLOTS = {RED: ((10, 11), (12, 11)), BLUE: ((10, 3), (12, 3))}
CARRIED, USED = "carried", "used"


def can_move(cell, nxt) -> bool:
    if nxt not in REGION_OF:
        return False
    return REGION_OF[cell] == REGION_OF[nxt] or frozenset({cell, nxt}) in OPENINGS


def intended_cell(cell, action):
    dx, dy = _DELTA[action]
    nxt = (cell[0] + dx, cell[1] + dy)
    return nxt if can_move(cell, nxt) else cell


# -- cookie variant ---------------------------------------------------------
# state = (cell, cookie) with cookie in {None, RED, BLUE}


def _cookie_initial():
    return [((MID_HALL, None), 1.0)]


def _cookie_step(state, action):
    """Distribution over ``(next_state, reward)``."""
    cell, cookie = state
    out = []
    for target, p in ((intended_cell(cell, action), 1.0 - SLIP), (cell, SLIP)):
        if target == cell:
            out.append(((cell, cookie), 0.0, p))
            continue
        if target == BUTTON:
            out.append(((target, RED), 0.0, p / 2))
            out.append(((target, BLUE), 0.0, p / 2))
        elif cookie is not None and target == COOKIE_CELL[cookie]:
            out.append(((target, None), 1.0, p))
        else:
            out.append(((target, cookie), 0.0, p))
    return out


def _cookie_obs(state):
    cell, cookie = state
    region = REGION_OF[cell]
    visible = region in (RED, BLUE) and cookie == region
    return (region, LOCAL_INDEX[cell], visible)


def _cookie_label(state):
    cell, cookie = state
    return f"{cell}|cookie={cookie or '-'}"


# -- keys variant -----------------------------------------------------------
# state = (cell, keys, doors); keys = (status0, status1) with status in
# {RED, BLUE, CARRIED, USED}; doors = (open0, open1)


def _scatter_keys():
    return [((k0, k1), 0.25) for k0, k1 in product((RED, BLUE), repeat=2)]


def _keys_initial():
    return [((MID_HALL, keys, (False, False)), p) for keys, p in _scatter_keys()]


def _key_at(cell, keys):
    for i, status in enumerate(keys):
        if status in KEY_SLOTS and KEY_SLOTS[status][i] == cell:
            return i
    return None


def _keys_step(state, action):
    cell, keys, doors = state
    out = []
    for target, p in ((intended_cell(cell, action), 1.0 - SLIP), (cell, SLIP)):
        if target == cell:
            out.append((state, 0.0, p))
            continue
        new_keys, new_doors = list(keys), list(doors)
        carrying = CARRIED in keys
        if target in DOORS:
            d = DOORS.index(target)
            if not doors[d]:
                if not carrying:
                    out.append((state, 0.0, p))  # locked: bump
                    continue
                new_keys[keys.index(CARRIED)] = USED
                new_doors[d] = True
        if target == COFFEE:
            for scattered, q in _scatter_keys():
                out.append(((MID_HALL, scattered, (False, False)), 1.0, p * q))
            continue
        k = _key_at(target, keys)
        if k is not None and not carrying:
            new_keys[k] = CARRIED
        out.append(((target, tuple(new_keys), tuple(new_doors)), 0.0, p))
    return out


def _keys_obs(state):
    cell, keys, doors = state
    region = REGION_OF[cell]
    carrying = CARRIED in keys
    if region in (RED, BLUE):
        contents = tuple(status == region for status in keys)
    elif region == HALL:
        contents = doors
    else:
        contents = ()
    return (region, LOCAL_INDEX[cell], carrying, contents)


def _keys_label(state):
    cell, keys, doors = state
    return f"{cell}|keys={','.join(keys)}|doors={''.join('o' if d else 'x' for d in doors)}"


_VARIANTS = {
    "cookie": (_cookie_initial, _cookie_step, _cookie_obs, _cookie_label),
    "keys": (_keys_initial, _keys_step, _keys_obs, _keys_label),
}


def build_hallway(variant: str = "cookie", horizon: int = HORIZON, discount: float = 0.95) -> TabularPomdp:
    """Tabular hallway domain over the states reachable from the start."""
    if variant not in _VARIANTS:
        raise UsageError(f"unknown hallway variant {variant!r} (expected 'cookie' or 'keys')")
    initial, step_fn, obs_fn, label_fn = _VARIANTS[variant]

    index: dict = {}
    states: list = []

    def intern(st):
        if st not in index:
            index[st] = len(states)
            states.append(st)
        return index[st]

    mu_pairs = [(intern(st), p) for st, p in initial()]
    rewards = [0.0, 1.0]
    dynamics = []
    queue = deque(range(len(states)))
    while queue:
        i = queue.popleft()
        rows = []
        for a in range(4):
            acc: dict = {}
            for nxt, r, p in step_fn(states[i], a):
                known = nxt in index
                j = intern(nxt)
                if not known:
                    queue.append(j)
                key = (j, rewards.index(r))
                acc[key] = acc.get(key, 0.0) + p
            rows.append([(j, r, p) for (j, r), p in acc.items()])
        dynamics.append((i, rows))
    dynamics = [rows for _, rows in sorted(dynamics)]

    obs_ids: dict = {}
    obs_labels = []
    observation_fn = []
    for st in states:
        key = obs_fn(st)
        if key not in obs_ids:
            obs_ids[key] = len(obs_ids)
            obs_labels.append(str(key))
        observation_fn.append([(obs_ids[key], 1.0)])

    mu = [0.0] * len(states)
    for i, p in mu_pairs:
        mu[i] += p
    pomdp = TabularPomdp(
        num_states=len(states),
        num_observations=len(obs_ids),
        num_actions=4,
        rewards=rewards,
        dynamics=dynamics,
        observation_fn=observation_fn,
        discount=discount,
        initial_dist=mu,
        terminal=[False] * len(states),
        horizon=horizon,
        name=f"hallway_{variant}",
        state_labels=[label_fn(st) for st in states],
        observation_labels=obs_labels,
        action_labels=list(ACTION_NAMES),
    )
    pomdp.states = states
    pomdp.observation_keys = list(obs_ids)
    return pomdp
