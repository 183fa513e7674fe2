"""Memory-augmented environments: an online wrapper and the explicit product POMDP."""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .errors import CapacityError, UsageError
from .memories import MemoryModule, make_memory
from .pomdp import TabularPomdp

DEFAULT_MAX_PRODUCT_STATES = 10**6


class AugmentedEnv:
    """Composition of a POMDP with an external memory.

    The agent observes ``<o, m>`` (index ``m * |O| + o``) and acts with ``<a, w>``
    (index ``a * |W| + w``).  Rewards come only from the sub-environment.
    """

    def __init__(self, base: TabularPomdp, memory: MemoryModule):
        self.base = base
        self.memory = memory
        self.num_observations = memory.num_memory_states * base.num_observations
        self.num_actions = base.num_actions * memory.num_write_actions

    @classmethod
    def from_spec(cls, base: TabularPomdp, spec: str, max_memory_states=None) -> "AugmentedEnv":
        kwargs = {} if max_memory_states is None else {"max_states": max_memory_states}
        mem = make_memory(spec, base.num_observations, base.num_actions, **kwargs)
        return cls(base, mem)

    def __repr__(self):
        return f"AugmentedEnv({self.base.name or 'pomdp'} + {self.memory.spec})"

    # -- index codecs -----------------------------------------------------

    def encode_obs(self, o: int, m: int) -> int:
        return m * self.base.num_observations + o

    def decode_obs(self, index: int) -> tuple[int, int]:
        m, o = divmod(index, self.base.num_observations)
        return o, m

    def encode_action(self, a: int, w: int) -> int:
        return a * self.memory.num_write_actions + w

    def decode_action(self, index: int) -> tuple[int, int]:
        return divmod(index, self.memory.num_write_actions)

    def observation_label(self, index: int) -> str:
        o, m = self.decode_obs(index)
        labels = self.base.observation_labels
        o_label = labels[o] if labels else f"o{o}"
        return f"<{o_label},{self.memory.memory_label(m)}>"

    def action_label(self, index: int) -> str:
        a, w = self.decode_action(index)
        labels = self.base.action_labels
        a_label = labels[a] if labels else f"a{a}"
        return f"<{a_label},{self.memory.write_label(w)}>"

    # -- interaction ------------------------------------------------------

    def reset(self, rng: np.random.Generator) -> tuple[int, int]:
        """Sample ``s0 ~ mu``, ``o0 ~ omega(.|s0)``, ``m0 ~ eta``; return ``(s0, <o0, m0>)``."""
        s = self.base.sample_initial_state(rng)
        o = self.base.sample_observation(s, rng)
        m = self.memory.sample_initial(rng)
        return s, self.encode_obs(o, m)

    def step(self, state: int, aug_obs: int, pair_action: int, rng: np.random.Generator, t: int | None = None):
        """Take ``<a, w>`` from hidden ``state`` while observing ``aug_obs``.

        Returns ``(next_state, next_memory, reward, next_aug_obs, done)``.
        """
        base = self.base
        base.check_state(state)
        if not 0 <= pair_action < self.num_actions:
            raise IndexError(f"action {pair_action} out of range [0, {self.num_actions})")
        if not 0 <= aug_obs < self.num_observations:
            raise IndexError(f"observation {aug_obs} out of range [0, {self.num_observations})")
        if base.terminal[state]:
            raise UsageError(f"cannot step from terminal state {state}")
        o, m = self.decode_obs(aug_obs)
        a, w = self.decode_action(pair_action)
        nxt, ridx = base.sample_transition(state, a, rng)
        o_next = base.sample_observation(nxt, rng)
        m_next = self.memory.sample_transition(m, w, o, a, ridx, o_next, rng)
        done = base.terminal[nxt] or (base.horizon is not None and t is not None and t + 1 >= base.horizon)
        return nxt, m_next, base.rewards[ridx], self.encode_obs(o_next, m_next), bool(done)

    def outcomes(self, state: int, aug_obs: int, pair_action: int):
        """Exact distribution behind :meth:`step`: list of ``(prob, s', m', reward, <o', m'>)``."""
        base = self.base
        o, m = self.decode_obs(aug_obs)
        a, w = self.decode_action(pair_action)
        out = []
        for nxt, ridx, p in base.dynamics[state][a]:
            if p <= 0:
                continue
            for o_next, q in base.observation_fn[nxt]:
                if q <= 0:
                    continue
                for m_next, g in self.memory.transition(m, w, o, a, ridx, o_next):
                    out.append((p * q * g, nxt, m_next, base.rewards[ridx], self.encode_obs(o_next, m_next)))
        return out

    def initial_outcomes(self):
        """Exact initial distribution: list of ``(prob, s0, <o0, m0>)``."""
        base = self.base
        out = []
        for s, ps in enumerate(base.initial_dist):
            if ps <= 0:
                continue
            for o, q in base.observation_fn[s]:
                if q <= 0:
                    continue
                for m, g in enumerate(self.memory.initial_dist):
                    if g > 0:
                        out.append((ps * q * g, s, self.encode_obs(o, m)))
        return out


class ProductPomdp(TabularPomdp):
    """Explicit POMDP over ``S' = S x M x O`` built from an :class:`AugmentedEnv`.

    ``components[i]`` is the ``(s, m, o)`` triple of product state ``i``.
    """

    env: AugmentedEnv
    components: list


def build_product_pomdp(env: AugmentedEnv, max_states: int = DEFAULT_MAX_PRODUCT_STATES) -> ProductPomdp:
    """Materialize the states of ``S x M x O`` reachable from ``mu'``.

    ``p'(<s',m',o'>, r | <s,m,o>, <a,w>) = p(s',r|s,a) Gamma(m'|m,w,o,a,r,o') omega(o'|s')``;
    the product observation of ``<s,m,o>`` is ``<o,m>`` deterministically.
    """
    base, mem = env.base, env.memory
    index: dict[tuple[int, int, int], int] = {}
    components: list[tuple[int, int, int]] = []

    def intern(key):
        idx = index.get(key)
        if idx is None:
            if len(components) >= max_states:
                raise CapacityError(f"product POMDP exceeds {max_states} reachable states")
            idx = len(components)
            index[key] = idx
            components.append(key)
        return idx

    mu_acc: dict[int, float] = defaultdict(float)
    for s, ps in enumerate(base.initial_dist):
        if ps <= 0:
            continue
        for o, q in base.observation_fn[s]:
            if q <= 0:
                continue
            for m, g in enumerate(mem.initial_dist):
                if g > 0:
                    mu_acc[intern((s, m, o))] += ps * q * g

    zero_idx = base.rewards.index(0.0) if 0.0 in base.rewards else None
    num_actions = env.num_actions
    num_writes = mem.num_write_actions
    dynamics: list = []
    frontier = 0
    while frontier < len(components):
        s, m, o = components[frontier]
        me = frontier
        frontier += 1
        if base.terminal[s]:
            if zero_idx is None:
                raise ValueError("terminal states require a zero reward in R")
            dynamics.append([[(me, zero_idx, 1.0)] for _ in range(num_actions)])
            continue
        rows = []
        for a in range(base.num_actions):
            base_row = base.dynamics[s][a]
            for w in range(num_writes):
                acc: dict[tuple[int, int], float] = defaultdict(float)
                for nxt, ridx, p in base_row:
                    if p <= 0:
                        continue
                    for o_next, q in base.observation_fn[nxt]:
                        if q <= 0:
                            continue
                        for m_next, g in mem.transition(m, w, o, a, ridx, o_next):
                            acc[(intern((nxt, m_next, o_next)), ridx)] += p * q * g
                rows.append([(n, r, p) for (n, r), p in acc.items()])
        dynamics.append(rows)

    n = len(components)
    mu = np.zeros(n)
    for idx, p in mu_acc.items():
        mu[idx] = p
    observation_fn = [[(env.encode_obs(o, m), 1.0)] for (s, m, o) in components]
    terminal = [base.terminal[s] for (s, m, o) in components]
    state_labels = [f"({s},{mem.memory_label(m)},{o})" for (s, m, o) in components]

    prod = ProductPomdp(
        num_states=n,
        num_observations=env.num_observations,
        num_actions=num_actions,
        rewards=base.rewards,
        dynamics=dynamics,
        observation_fn=observation_fn,
        discount=base.discount,
        initial_dist=mu,
        terminal=terminal,
        horizon=base.horizon,
        name=f"{base.name}+{mem.spec}",
        state_labels=state_labels,
        observation_labels=[env.observation_label(i) for i in range(env.num_observations)],
        action_labels=[env.action_label(i) for i in range(num_actions)],
    )
    prod.env = env
    prod.components = components
    return prod


def augment(base: TabularPomdp, spec: str, max_states: int = DEFAULT_MAX_PRODUCT_STATES) -> ProductPomdp:
    """Shorthand: wrap ``base`` with memory ``spec`` and build the product POMDP."""
    return build_product_pomdp(AugmentedEnv.from_spec(base, spec), max_states)
