"""Tabular POMDPs: definition, simulation, belief updates and exact evaluation.

A POMDP is stored literally as ``<S, O, A, R, p, omega, gamma, mu>``: rewards are an
indexed finite set and ``dynamics[s][a]`` lists ``(s', reward_index, prob)``
outcomes.  Dense/sparse array views used by the numerical routines are compiled
lazily and cached on the instance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    InconsistentHistoryError,
    InvalidPomdpError,
    UnsupportedConfigurationError,
    UsageError,
)

SUM_TOL = 1e-12
BELIEF_TOL = 1e-9


class TabularPomdp:
    """Finite POMDP with explicit probability tables.

    Instances are treated as immutable once built; all cached arrays are
    read-only.
    """

    def __init__(
        self,
        num_states: int,
        num_observations: int,
        num_actions: int,
        rewards: Sequence[float],
        dynamics,
        observation_fn,
        discount: float,
        initial_dist: Sequence[float],
        terminal: Sequence[bool] | None = None,
        horizon: int | None = None,
        name: str = "",
        state_labels: Sequence | None = None,
        observation_labels: Sequence | None = None,
        action_labels: Sequence | None = None,
        validate: bool = True,
    ):
        self.num_states = int(num_states)
        self.num_observations = int(num_observations)
        self.num_actions = int(num_actions)
        self.rewards = tuple(float(r) for r in rewards)
        self.dynamics = tuple(
            tuple(tuple((int(n), int(r), float(p)) for n, r, p in row) for row in per_s)
            for per_s in dynamics
        )
        self.observation_fn = tuple(
            tuple((int(o), float(p)) for o, p in row) for row in observation_fn
        )
        self.discount = float(discount)
        self.initial_dist = tuple(float(p) for p in initial_dist)
        self.terminal = tuple(bool(t) for t in terminal) if terminal is not None else (False,) * self.num_states
        self.horizon = None if horizon is None else int(horizon)
        self.name = name
        self.state_labels = list(state_labels) if state_labels is not None else None
        self.observation_labels = list(observation_labels) if observation_labels is not None else None
        self.action_labels = list(action_labels) if action_labels is not None else None
        if validate:
            self.validate()

    def __repr__(self):
        return (
            f"TabularPomdp(name={self.name!r}, |S|={self.num_states}, |O|={self.num_observations}, "
            f"|A|={self.num_actions}, gamma={self.discount}, horizon={self.horizon})"
        )

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        """Raise :class:`InvalidPomdpError` naming the first violated invariant."""
        S, O, A = self.num_states, self.num_observations, self.num_actions
        if S < 1 or O < 1 or A < 1:
            raise InvalidPomdpError("state, observation and action counts must be positive")
        if not self.rewards:
            raise InvalidPomdpError("reward set is empty", "rewards")
        if not all(np.isfinite(self.rewards)):
            raise InvalidPomdpError("rewards must be finite", "rewards")
        if not 0.0 <= self.discount <= 1.0:
            raise InvalidPomdpError(f"discount {self.discount} outside [0, 1]", "discount")
        if self.horizon is not None and self.horizon < 1:
            raise InvalidPomdpError("horizon must be >= 1", "horizon")
        if len(self.dynamics) != S:
            raise InvalidPomdpError(f"expected {S} rows, got {len(self.dynamics)}", "dynamics")
        if len(self.observation_fn) != S:
            raise InvalidPomdpError(f"expected {S} rows, got {len(self.observation_fn)}", "observation_fn")
        if len(self.terminal) != S:
            raise InvalidPomdpError(f"expected {S} entries", "terminal")
        if len(self.initial_dist) != S:
            raise InvalidPomdpError(f"expected {S} entries", "initial_dist")
        for s, per_s in enumerate(self.dynamics):
            if len(per_s) != A:
                raise InvalidPomdpError(f"expected {A} actions, got {len(per_s)}", f"dynamics[{s}]")
            for a, row in enumerate(per_s):
                path = f"dynamics[{s}][{a}]"
                total = 0.0
                for j, (n, r, p) in enumerate(row):
                    if not 0 <= n < S:
                        raise InvalidPomdpError(f"next state {n} out of range", f"{path}[{j}]")
                    if not 0 <= r < len(self.rewards):
                        raise InvalidPomdpError(f"reward index {r} out of range", f"{path}[{j}]")
                    if not p >= 0.0:
                        raise InvalidPomdpError(f"negative probability {p}", f"{path}[{j}]")
                    total += p
                if abs(total - 1.0) > SUM_TOL:
                    raise InvalidPomdpError(f"probabilities sum to {total!r}", path)
                if self.terminal[s]:
                    for j, (n, r, p) in enumerate(row):
                        if p > 0 and (n != s or self.rewards[r] != 0.0):
                            raise InvalidPomdpError(
                                "terminal states must be absorbing with zero reward", f"{path}[{j}]"
                            )
        for s, row in enumerate(self.observation_fn):
            path = f"observation_fn[{s}]"
            total = 0.0
            for j, (o, p) in enumerate(row):
                if not 0 <= o < O:
                    raise InvalidPomdpError(f"observation {o} out of range", f"{path}[{j}]")
                if not p >= 0.0:
                    raise InvalidPomdpError(f"negative probability {p}", f"{path}[{j}]")
                total += p
            if abs(total - 1.0) > SUM_TOL:
                raise InvalidPomdpError(f"probabilities sum to {total!r}", path)
        mu = np.asarray(self.initial_dist)
        if np.any(mu < 0) or abs(mu.sum() - 1.0) > SUM_TOL:
            raise InvalidPomdpError(f"initial distribution sums to {mu.sum()!r}", "initial_dist")

    # -- compiled views ---------------------------------------------------

    @cached_property
    def _csr(self):
        S, A = self.num_states, self.num_actions
        ptr = np.zeros(S * A + 1, dtype=np.int64)
        nxt, ridx, prob = [], [], []
        for s, per_s in enumerate(self.dynamics):
            for a, row in enumerate(per_s):
                for n, r, p in row:
                    if p > 0.0:
                        nxt.append(n)
                        ridx.append(r)
                        prob.append(p)
                ptr[s * A + a + 1] = len(nxt)
        arrays = (
            ptr,
            np.asarray(nxt, dtype=np.int64),
            np.asarray(ridx, dtype=np.int64),
            np.asarray(prob, dtype=float),
        )
        for arr in arrays:
            arr.flags.writeable = False
        return arrays

    @cached_property
    def _obs_csr(self):
        S = self.num_states
        ptr = np.zeros(S + 1, dtype=np.int64)
        obs, prob = [], []
        for s, row in enumerate(self.observation_fn):
            for o, p in row:
                if p > 0.0:
                    obs.append(o)
                    prob.append(p)
            ptr[s + 1] = len(obs)
        return ptr, np.asarray(obs, dtype=np.int64), np.asarray(prob, dtype=float)

    @cached_property
    def transition_matrix(self) -> sp.csr_matrix:
        """Sparse ``(S*A) x S`` matrix of ``p(s'|s,a)`` (row index ``s*A + a``)."""
        ptr, nxt, _, prob = self._csr
        rows = np.repeat(np.arange(self.num_states * self.num_actions), np.diff(ptr))
        shape = (self.num_states * self.num_actions, self.num_states)
        return sp.csr_matrix((prob, (rows, nxt)), shape=shape)

    @cached_property
    def expected_reward(self) -> np.ndarray:
        """``r(s,a) = E[r | s,a]`` as an ``S x A`` array."""
        ptr, _, ridx, prob = self._csr
        R = np.asarray(self.rewards)
        contrib = prob * R[ridx]
        rows = np.repeat(np.arange(self.num_states * self.num_actions), np.diff(ptr))
        out = np.bincount(rows, weights=contrib, minlength=self.num_states * self.num_actions)
        out = out.reshape(self.num_states, self.num_actions)
        out.flags.writeable = False
        return out

    @cached_property
    def observation_matrix(self) -> sp.csr_matrix:
        """Sparse ``S x O`` matrix of ``omega(o|s)``."""
        ptr, obs, prob = self._obs_csr
        rows = np.repeat(np.arange(self.num_states), np.diff(ptr))
        return sp.csr_matrix((prob, (rows, obs)), shape=(self.num_states, self.num_observations))

    @cached_property
    def nonterminal(self) -> np.ndarray:
        mask = ~np.asarray(self.terminal, dtype=bool)
        mask.flags.writeable = False
        return mask

    @cached_property
    def mu(self) -> np.ndarray:
        arr = np.asarray(self.initial_dist, dtype=float)
        arr.flags.writeable = False
        return arr

    @property
    def reward_max(self) -> float:
        return max(self.rewards)

    # -- sampling ---------------------------------------------------------

    def sample_initial_state(self, rng: np.random.Generator) -> int:
        return int(_draw(self.mu, rng.random()))

    def sample_observation(self, state: int, rng: np.random.Generator) -> int:
        ptr, obs, prob = self._obs_csr
        lo, hi = ptr[state], ptr[state + 1]
        return int(obs[lo + _draw(prob[lo:hi], rng.random())])

    def sample_transition(self, state: int, action: int, rng: np.random.Generator) -> tuple[int, int]:
        """Draw ``(s', reward_index)`` from ``p(s', r | s, a)``."""
        ptr, nxt, ridx, prob = self._csr
        row = state * self.num_actions + action
        lo, hi = ptr[row], ptr[row + 1]
        j = lo + _draw(prob[lo:hi], rng.random())
        return int(nxt[j]), int(ridx[j])

    def check_state(self, state: int) -> None:
        if not 0 <= state < self.num_states:
            raise IndexError(f"state {state} out of range [0, {self.num_states})")

    def check_action(self, action: int) -> None:
        if not 0 <= action < self.num_actions:
            raise IndexError(f"action {action} out of range [0, {self.num_actions})")

    def check_observation(self, obs: int) -> None:
        if not 0 <= obs < self.num_observations:
            raise IndexError(f"observation {obs} out of range [0, {self.num_observations})")

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "num_states": self.num_states,
            "num_observations": self.num_observations,
            "num_actions": self.num_actions,
            "rewards": list(self.rewards),
            "dynamics": [[[list(t) for t in row] for row in per_s] for per_s in self.dynamics],
            "observation_fn": [[list(t) for t in row] for row in self.observation_fn],
            "discount": self.discount,
            "initial_dist": list(self.initial_dist),
            "terminal": list(self.terminal),
            "horizon": self.horizon,
        }
        for key in ("state_labels", "observation_labels", "action_labels"):
            labels = getattr(self, key)
            if labels is not None:
                out[key] = [str(x) for x in labels]
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "TabularPomdp":
        required = (
            "num_states", "num_observations", "num_actions", "rewards",
            "dynamics", "observation_fn", "discount", "initial_dist",
        )
        optional = ("terminal", "horizon", "name", "state_labels", "observation_labels", "action_labels")
        if not isinstance(doc, dict):
            raise InvalidPomdpError("document must be a JSON object")
        for key in required:
            if key not in doc:
                raise InvalidPomdpError("missing required field", key)
        for key in doc:
            if key not in required and key not in optional:
                raise InvalidPomdpError("unknown field", key)
        try:
            dynamics = [
                [[(n, r, p) for n, r, p in row] for row in per_s] for per_s in doc["dynamics"]
            ]
            observation_fn = [[(o, p) for o, p in row] for row in doc["observation_fn"]]
        except (TypeError, ValueError) as exc:
            raise InvalidPomdpError(f"malformed probability table ({exc})") from exc
        return cls(
            num_states=doc["num_states"],
            num_observations=doc["num_observations"],
            num_actions=doc["num_actions"],
            rewards=doc["rewards"],
            dynamics=dynamics,
            observation_fn=observation_fn,
            discount=doc["discount"],
            initial_dist=doc["initial_dist"],
            terminal=doc.get("terminal"),
            horizon=doc.get("horizon"),
            name=doc.get("name", ""),
            state_labels=doc.get("state_labels"),
            observation_labels=doc.get("observation_labels"),
            action_labels=doc.get("action_labels"),
        )


def _draw(probs: np.ndarray, u: float) -> int:
    cdf = np.cumsum(probs)
    j = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(j, len(probs) - 1)


def dump_pomdp(pomdp: TabularPomdp, path) -> None:
    with open(path, "w") as fh:
        json.dump(pomdp.to_dict(), fh)


def load_pomdp(path) -> TabularPomdp:
    with open(path) as fh:
        return TabularPomdp.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Value types


@dataclass(frozen=True, eq=False)
class Belief:
    """Probability vector over hidden states; equality is L-infinity within ``tolerance``."""

    probs: np.ndarray
    tolerance: float = BELIEF_TOL

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or np.any(probs < 0) or abs(probs.sum() - 1.0) > SUM_TOL:
            raise ValueError("belief must be a non-negative vector summing to 1")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    def __eq__(self, other):
        if not isinstance(other, Belief):
            return NotImplemented
        return self.probs.shape == other.probs.shape and bool(
            np.max(np.abs(self.probs - other.probs)) <= self.tolerance
        )

    __hash__ = None

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)


@dataclass(frozen=True, eq=False)
class StochasticPolicy:
    """Row-stochastic table ``pi[o, a]``."""

    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if table.ndim != 2:
            raise ValueError("policy table must be 2-D (observations x actions)")
        if np.any(table < 0) or np.any(np.abs(table.sum(axis=1) - 1.0) > SUM_TOL):
            raise ValueError("policy rows must be probability vectors")
        table.flags.writeable = False
        object.__setattr__(self, "table", table)

    @property
    def num_observations(self) -> int:
        return self.table.shape[0]

    @property
    def num_actions(self) -> int:
        return self.table.shape[1]

    @classmethod
    def uniform(cls, num_observations: int, num_actions: int) -> "StochasticPolicy":
        return cls(np.full((num_observations, num_actions), 1.0 / num_actions))

    @classmethod
    def deterministic(cls, actions: Sequence[int], num_actions: int) -> "StochasticPolicy":
        table = np.zeros((len(actions), num_actions))
        table[np.arange(len(actions)), np.asarray(actions, dtype=int)] = 1.0
        return cls(table)

    def action_probs(self, obs: int) -> np.ndarray:
        return self.table[obs]

    def sample(self, obs: int, rng: np.random.Generator) -> int:
        return _draw(self.table[obs], rng.random())


@dataclass(frozen=True, eq=False)
class QTable:
    """Dense action-value table indexed by (observation-or-state, action)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or not np.all(np.isfinite(values)):
            raise ValueError("q-table must be a finite 2-D array")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def shape(self):
        return self.values.shape

    def greedy(self) -> np.ndarray:
        """Greedy action per row; ties go to the lowest index."""
        return np.argmax(self.values, axis=1)


@dataclass
class Trajectory:
    """One episode as ``(observation, action, reward, next_observation)`` steps."""

    steps: list = field(default_factory=list)
    terminal: bool = False

    def __len__(self):
        return len(self.steps)

    def append(self, obs, action, reward, next_obs):
        self.steps.append((obs, action, reward, next_obs))

    @property
    def total_reward(self) -> float:
        return float(sum(step[2] for step in self.steps))


# ---------------------------------------------------------------------------
# Simulation and beliefs


def step(pomdp: TabularPomdp, state: int, action: int, rng: np.random.Generator, t: int | None = None):
    """Advance one step from ``state``.

    ``t`` is the index of the step being taken within the episode; when given and
    the POMDP has a horizon, ``done`` also reports truncation.

    Returns ``(next_state, reward, next_observation, done)``.
    """
    pomdp.check_state(state)
    pomdp.check_action(action)
    if pomdp.terminal[state]:
        raise UsageError(f"cannot step from terminal state {state}")
    nxt, ridx = pomdp.sample_transition(state, action, rng)
    obs = pomdp.sample_observation(nxt, rng)
    done = pomdp.terminal[nxt] or (
        pomdp.horizon is not None and t is not None and t + 1 >= pomdp.horizon
    )
    return nxt, pomdp.rewards[ridx], obs, bool(done)


def rollout(pomdp: TabularPomdp, policy: StochasticPolicy, rng: np.random.Generator, max_steps: int | None = None):
    """Sample one episode under a memoryless policy; returns a :class:`Trajectory`."""
    cap = pomdp.horizon if max_steps is None else max_steps
    state = pomdp.sample_initial_state(rng)
    obs = pomdp.sample_observation(state, rng)
    traj = Trajectory()
    t = 0
    while not pomdp.terminal[state] and (cap is None or t < cap):
        action = policy.sample(obs, rng)
        state, reward, nxt_obs, _ = step(pomdp, state, action, rng, t)
        traj.append(obs, action, reward, nxt_obs)
        obs = nxt_obs
        t += 1
    traj.terminal = bool(pomdp.terminal[state])
    return traj


def _normalize(weights: np.ndarray, what: str) -> Belief:
    total = weights.sum()
    if total <= 0.0:
        raise InconsistentHistoryError(f"{what} has zero probability under the model")
    probs = weights / total
    return Belief(probs)


def initial_belief(pomdp: TabularPomdp, observation: int) -> Belief:
    """``b0(s) ∝ mu(s) * omega(o0|s)``."""
    pomdp.check_observation(observation)
    lik = pomdp.observation_matrix[:, observation].toarray().ravel()
    return _normalize(pomdp.mu * lik, f"initial observation {observation}")


def update_belief(pomdp: TabularPomdp, belief: Belief, action: int, observation: int) -> Belief:
    """``b'(s') ∝ omega(o|s') * sum_s p(s'|s,a) b(s)``."""
    pomdp.check_action(action)
    pomdp.check_observation(observation)
    A = pomdp.num_actions
    P_a = pomdp.transition_matrix[action::A]
    predicted = P_a.T @ belief.probs
    lik = pomdp.observation_matrix[:, observation].toarray().ravel()
    return _normalize(predicted * lik, f"observation {observation} after action {action}")


def predictive_observation_probs(pomdp: TabularPomdp, belief: Belief, action: int) -> np.ndarray:
    """``P(o' | b, a)`` as a vector over observations."""
    P_a = pomdp.transition_matrix[action :: pomdp.num_actions]
    predicted = P_a.T @ belief.probs
    return pomdp.observation_matrix.T @ predicted


# ---------------------------------------------------------------------------
# Exact evaluation


def state_policy(pomdp: TabularPomdp, policy: StochasticPolicy) -> np.ndarray:
    """``pi(a|s) = sum_o omega(o|s) pi(a|o)`` as an ``S x A`` array."""
    if policy.table.shape != (pomdp.num_observations, pomdp.num_actions):
        raise ValueError(
            f"policy shape {policy.table.shape} does not match "
            f"({pomdp.num_observations}, {pomdp.num_actions})"
        )
    return np.asarray(pomdp.observation_matrix @ policy.table)


def state_transition_under(pomdp: TabularPomdp, pi_s: np.ndarray) -> sp.csr_matrix:
    """``P_pi[s, s'] = sum_a pi(a|s) p(s'|s,a)``."""
    S, A = pomdp.num_states, pomdp.num_actions
    weighted = sp.diags(pi_s.ravel()) @ pomdp.transition_matrix
    agg = sp.csr_matrix(
        (np.ones(S * A), (np.repeat(np.arange(S), A), np.arange(S * A))), shape=(S, S * A)
    )
    return (agg @ weighted).tocsr()


def backward_q(pomdp: TabularPomdp, pi_s: np.ndarray, horizon: int,
               discount: float | None = None) -> Iterator[np.ndarray]:
    """Yield ``q_h`` for ``h = 1..horizon`` steps-to-go (each ``S x A``)."""
    gamma = pomdp.discount if discount is None else discount
    P = pomdp.transition_matrix
    r = pomdp.expected_reward
    live = pomdp.nonterminal.astype(float)
    q = np.array(r)
    q[~pomdp.nonterminal] = 0.0
    yield q
    for _ in range(horizon - 1):
        v = (pi_s * q).sum(axis=1) * live
        q = r + gamma * (P @ v).reshape(r.shape)
        q[~pomdp.nonterminal] = 0.0
        yield q


def _linear_q(pomdp: TabularPomdp, pi_s: np.ndarray) -> np.ndarray:
    gamma = pomdp.discount
    if gamma >= 1.0:
        raise UnsupportedConfigurationError("linear solve requires discount < 1")
    S = pomdp.num_states
    live = pomdp.nonterminal
    r = pomdp.expected_reward
    r_pi = (pi_s * r).sum(axis=1) * live
    P_pi = state_transition_under(pomdp, pi_s)
    N = sp.diags(live.astype(float))
    system = (sp.identity(S, format="csc") - gamma * (N @ P_pi @ N)).tocsc()
    v = spla.spsolve(system, r_pi)
    v = np.atleast_1d(v) * live
    q = r + gamma * (pomdp.transition_matrix @ v).reshape(r.shape)
    q[~live] = 0.0
    return q


def exact_state_q(pomdp: TabularPomdp, policy: StochasticPolicy, method: str = "auto") -> QTable:
    """Exact ``q_pi(s, a)`` for a memoryless observation policy.

    ``method='backward'`` runs backward induction over the horizon (the value at
    the first step of an episode); ``'linear'`` solves the infinite-horizon
    discounted system; ``'auto'`` picks backward induction when a horizon is set.
    """
    pi_s = state_policy(pomdp, policy)
    if method == "auto":
        method = "backward" if pomdp.horizon is not None else "linear"
    if method == "backward":
        if pomdp.horizon is None:
            raise UnsupportedConfigurationError("backward induction needs a horizon")
        for q in backward_q(pomdp, pi_s, pomdp.horizon):
            pass
        return QTable(q)
    if method == "linear":
        if pomdp.discount >= 1.0:
            raise UnsupportedConfigurationError(
                "discount = 1 without a horizon has no exact infinite-horizon solution here"
            )
        return QTable(_linear_q(pomdp, pi_s))
    raise ValueError(f"unknown method {method!r}")


def policy_value(pomdp: TabularPomdp, policy: StochasticPolicy, method: str = "auto",
                 discounted: bool = True) -> float:
    """Expected return from the initial distribution.

    With ``discounted=False`` rewards are summed without discounting over the
    horizon (the "episode return" of the finite-horizon tasks).
    """
    pi_s = state_policy(pomdp, policy)
    if discounted:
        q = exact_state_q(pomdp, policy, method).values
    else:
        if pomdp.horizon is None:
            raise UnsupportedConfigurationError("undiscounted value needs a horizon")
        for q in backward_q(pomdp, pi_s, pomdp.horizon, discount=1.0):
            pass
    return float(pomdp.mu @ (pi_s * q).sum(axis=1))
