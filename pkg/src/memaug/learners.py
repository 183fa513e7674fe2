"""Tabular learners: q-learning, true online Sarsa(lambda), n-step actor-critic.

The inner loops are numba kernels over a compiled copy of the POMDP.  All
randomness is drawn up front with numpy into blocks of uniforms, one row per
environment step, so runs are reproducible from a single seed and the kernels
never touch a random number generator.  Row layout::

    0  exploration coin        4  initial state
    1  action draw             5  initial observation
    2  transition draw         6  exploration coin for the first action
    3  observation draw        7  action draw for the first action
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .augmentation import AugmentedEnv, build_product_pomdp
from .errors import ConfigError
from .pomdp import StochasticPolicy, TabularPomdp

ALGORITHMS = ("q_learning", "sarsa_lambda", "nstep_actor_critic")
EVAL_MODES = ("greedy", "on_policy")
EVAL_METRICS = ("episode_return", "reward_per_100")
NUM_UNIFORMS = 8


@dataclass(frozen=True)
class LearnerConfig:
    algorithm: str = "q_learning"
    alpha: float = 0.1
    actor_alpha: float = 0.1
    critic_alpha: float = 0.001
    epsilon: float = 0.01
    lam: float = 0.0
    n: int = 5
    gamma: float = 0.95
    q0: float | None = None  # None: optimistic r_max / (1 - gamma)
    total_steps: int = 1_000_000
    eval_every: int = 10_000
    eval_mode: str = "greedy"
    eval_metric: str = "episode_return"
    eval_episodes: int = 1
    eval_steps: int = 10_000

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}", "learner.algorithm")
        for name in ("alpha", "actor_alpha", "critic_alpha"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ConfigError(f"{name} must be in (0, 1], got {value}", f"learner.{name}")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError("epsilon must be in [0, 1]", "learner.epsilon")
        if not 0 <= self.lam <= 1:
            raise ConfigError("lam must be in [0, 1]", "learner.lam")
        if self.n < 1:
            raise ConfigError("n must be >= 1", "learner.n")
        if not 0 <= self.gamma <= 1:
            raise ConfigError("gamma must be in [0, 1]", "learner.gamma")
        if self.total_steps < 1 or self.eval_every < 1:
            raise ConfigError("total_steps and eval_every must be positive", "learner.total_steps")
        if self.eval_mode not in EVAL_MODES:
            raise ConfigError(f"unknown eval_mode {self.eval_mode!r}", "learner.eval_mode")
        if self.eval_metric not in EVAL_METRICS:
            raise ConfigError(f"unknown eval_metric {self.eval_metric!r}", "learner.eval_metric")
        if self.eval_episodes < 1 or self.eval_steps < 1:
            raise ConfigError("evaluation sizes must be positive", "learner.eval_episodes")

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunRecord:
    """Evaluation metric at each checkpoint of one training run."""

    steps: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    seed: int = 0
    config_hash: str = ""

    def add(self, step: int, metric: float):
        if self.steps and step <= self.steps[-1]:
            raise ValueError("step stamps must increase")
        self.steps.append(int(step))
        self.metrics.append(float(metric))

    def as_arrays(self):
        return np.asarray(self.steps), np.asarray(self.metrics)


# ---------------------------------------------------------------------------
# Compiled environment


@dataclass(frozen=True)
class CompiledEnv:
    """Flat arrays describing a POMDP for the numba kernels."""

    tptr: np.ndarray
    tnext: np.ndarray
    tcdf: np.ndarray
    treward: np.ndarray
    optr: np.ndarray
    oobs: np.ndarray
    ocdf: np.ndarray
    mucdf: np.ndarray
    terminal: np.ndarray
    num_observations: int
    num_actions: int
    horizon: int
    reward_max: float

    def arrays(self):
        return (self.tptr, self.tnext, self.tcdf, self.treward, self.optr, self.oobs,
                self.ocdf, self.mucdf, self.terminal)


_NO_HORIZON = np.iinfo(np.int64).max


def _row_cdfs(ptr: np.ndarray, prob: np.ndarray) -> np.ndarray:
    cdf = np.empty_like(prob)
    for i in range(len(ptr) - 1):
        lo, hi = ptr[i], ptr[i + 1]
        if hi > lo:
            cdf[lo:hi] = np.cumsum(prob[lo:hi])
            cdf[hi - 1] = np.inf  # guard against round-off at the top of the row
    return cdf


def compile_env(env) -> CompiledEnv:
    """Compile a :class:`TabularPomdp` (or an :class:`AugmentedEnv`, via its product POMDP)."""
    if isinstance(env, CompiledEnv):
        return env
    pomdp = build_product_pomdp(env) if isinstance(env, AugmentedEnv) else env
    cached = pomdp.__dict__.get("_compiled")
    if cached is not None:
        return cached
    ptr, nxt, ridx, prob = pomdp._csr
    optr, oobs, oprob = pomdp._obs_csr
    mucdf = np.cumsum(pomdp.mu)
    mucdf[np.flatnonzero(pomdp.mu > 0)[-1]:] = np.inf
    compiled = CompiledEnv(
        tptr=np.asarray(ptr, dtype=np.int64),
        tnext=np.asarray(nxt, dtype=np.int64),
        tcdf=_row_cdfs(ptr, prob),
        treward=np.asarray(pomdp.rewards, dtype=float)[ridx],
        optr=np.asarray(optr, dtype=np.int64),
        oobs=np.asarray(oobs, dtype=np.int64),
        ocdf=_row_cdfs(optr, oprob),
        mucdf=mucdf,
        terminal=np.asarray(pomdp.terminal, dtype=np.bool_),
        num_observations=pomdp.num_observations,
        num_actions=pomdp.num_actions,
        horizon=pomdp.horizon if pomdp.horizon is not None else _NO_HORIZON,
        reward_max=float(max(pomdp.rewards)),
    )
    pomdp.__dict__["_compiled"] = compiled
    return compiled


# ---------------------------------------------------------------------------
# Kernel helpers


@numba.njit(cache=True)
def _search(cdf, lo, hi, u):
    for j in range(lo, hi):
        if u < cdf[j]:
            return j
    return hi - 1


@numba.njit(cache=True)
def _reset(env, u_state, u_obs):
    tptr, tnext, tcdf, treward, optr, oobs, ocdf, mucdf, terminal = env
    s = _search(mucdf, 0, mucdf.shape[0], u_state)
    o = oobs[_search(ocdf, optr[s], optr[s + 1], u_obs)]
    return s, o


@numba.njit(cache=True)
def _transition(env, s, a, num_actions, u_next, u_obs):
    tptr, tnext, tcdf, treward, optr, oobs, ocdf, mucdf, terminal = env
    row = s * num_actions + a
    j = _search(tcdf, tptr[row], tptr[row + 1], u_next)
    s2 = tnext[j]
    o2 = oobs[_search(ocdf, optr[s2], optr[s2 + 1], u_obs)]
    return s2, o2, treward[j]


@numba.njit(cache=True)
def _argmax(row):
    best = 0
    for a in range(1, row.shape[0]):
        if row[a] > row[best]:
            best = a
    return best


@numba.njit(cache=True)
def _eps_greedy(row, eps, u_coin, u_action):
    if u_coin < eps:
        a = int(u_action * row.shape[0])
        return min(a, row.shape[0] - 1)
    return _argmax(row)


@numba.njit(cache=True)
def _softmax(row, out):
    m = row.max()
    total = 0.0
    for a in range(row.shape[0]):
        out[a] = np.exp(row[a] - m)
        total += out[a]
    for a in range(row.shape[0]):
        out[a] /= total


@numba.njit(cache=True)
def _sample_probs(probs, u):
    acc = 0.0
    for a in range(probs.shape[0]):
        acc += probs[a]
        if u < acc:
            return a
    for a in range(probs.shape[0] - 1, -1, -1):
        if probs[a] > 0:
            return a
    return probs.shape[0] - 1


# ---------------------------------------------------------------------------
# Kernels.  ``ctx`` carries the episode across chunks: [state, obs, t, action].


@numba.njit(cache=True)
def _q_learning_chunk(Q, ctx, U, env, num_actions, horizon, eps, alpha, gamma):
    terminal = env[8]
    s, o, t = ctx[0], ctx[1], ctx[2]
    for i in range(U.shape[0]):
        if s < 0:
            s, o = _reset(env, U[i, 4], U[i, 5])
            t = 0
        a = _eps_greedy(Q[o], eps, U[i, 0], U[i, 1])
        s2, o2, r = _transition(env, s, a, num_actions, U[i, 2], U[i, 3])
        t += 1
        if terminal[s2]:
            target = r
        else:
            target = r + gamma * Q[o2].max()
        Q[o, a] += alpha * (target - Q[o, a])
        if terminal[s2] or t >= horizon:
            s = -1
        else:
            s, o = s2, o2
    ctx[0], ctx[1], ctx[2] = s, o, t


@numba.njit(cache=True)
def _sarsa_chunk(Q, ctx, z, active, in_active, n_active, U, env, num_actions, horizon,
                 eps, alpha, gamma, lam, q_old):
    """True online Sarsa(lambda) with dutch traces on one-hot features.

    The weight update is written as ``w += alpha*delta*z + alpha*(Q - Q_old)*(z - x)``,
    which is the usual form rearranged so that lambda = 0 reduces exactly to
    one-step Sarsa.  ``active`` lists the entries with a nonzero trace this episode.
    """
    terminal = env[8]
    s, o, t, a = ctx[0], ctx[1], ctx[2], ctx[3]
    gl = gamma * lam
    for i in range(U.shape[0]):
        if s < 0:
            s, o = _reset(env, U[i, 4], U[i, 5])
            a = _eps_greedy(Q[o], eps, U[i, 6], U[i, 7])
            t = 0
        s2, o2, r = _transition(env, s, a, num_actions, U[i, 2], U[i, 3])
        t += 1
        a2 = _eps_greedy(Q[o2], eps, U[i, 0], U[i, 1])
        q = Q[o, a]
        q_next = 0.0 if terminal[s2] else Q[o2, a2]
        delta = r + gamma * q_next - q
        idx = o * num_actions + a
        zx = z[idx]
        for k in range(n_active[0]):
            z[active[k]] *= gl
        z[idx] += 1.0 - alpha * gl * zx
        if not in_active[idx]:
            in_active[idx] = True
            active[n_active[0]] = idx
            n_active[0] += 1
        dq = q - q_old[0]
        for k in range(n_active[0]):
            j = active[k]
            xj = 1.0 if j == idx else 0.0
            Q[j // num_actions, j % num_actions] += alpha * delta * z[j] + alpha * dq * (z[j] - xj)
        q_old[0] = q_next
        if terminal[s2] or t >= horizon:
            for k in range(n_active[0]):
                z[active[k]] = 0.0
                in_active[active[k]] = False
            n_active[0] = 0
            q_old[0] = 0.0
            s = -1
        else:
            s, o, a = s2, o2, a2
    ctx[0], ctx[1], ctx[2], ctx[3] = s, o, t, a


@numba.njit(cache=True)
def _ac_update(theta, V, probs, o, a, G, actor_alpha, critic_alpha):
    delta = G - V[o]
    V[o] += critic_alpha * delta
    _softmax(theta[o], probs)
    for b in range(theta.shape[1]):
        theta[o, b] -= actor_alpha * delta * probs[b]
    theta[o, a] += actor_alpha * delta


@numba.njit(cache=True)
def _ac_flush(theta, V, probs, buf_o, buf_a, buf_r, count, gamma, bootstrap, actor_alpha, critic_alpha):
    for j in range(count):
        G = bootstrap
        for k in range(count - 1, j - 1, -1):
            G = buf_r[k] + gamma * G
        _ac_update(theta, V, probs, buf_o[j], buf_a[j], G, actor_alpha, critic_alpha)


@numba.njit(cache=True)
def _actor_critic_chunk(theta, V, ctx, buf_o, buf_a, buf_r, U, env, num_actions, horizon,
                        n, gamma, actor_alpha, critic_alpha):
    terminal = env[8]
    probs = np.empty(theta.shape[1])
    s, o, t, count = ctx[0], ctx[1], ctx[2], ctx[3]
    for i in range(U.shape[0]):
        if s < 0:
            s, o = _reset(env, U[i, 4], U[i, 5])
            t = 0
            count = 0
        _softmax(theta[o], probs)
        a = _sample_probs(probs, U[i, 1])
        s2, o2, r = _transition(env, s, a, num_actions, U[i, 2], U[i, 3])
        t += 1
        buf_o[count] = o
        buf_a[count] = a
        buf_r[count] = r
        count += 1
        if terminal[s2]:
            _ac_flush(theta, V, probs, buf_o, buf_a, buf_r, count, gamma, 0.0, actor_alpha, critic_alpha)
            count = 0
            s = -1
            continue
        if t >= horizon:
            _ac_flush(theta, V, probs, buf_o, buf_a, buf_r, count, gamma, V[o2], actor_alpha, critic_alpha)
            count = 0
            s = -1
            continue
        if count == n:
            G = V[o2]
            for k in range(n - 1, -1, -1):
                G = buf_r[k] + gamma * G
            _ac_update(theta, V, probs, buf_o[0], buf_a[0], G, actor_alpha, critic_alpha)
            for k in range(1, n):
                buf_o[k - 1] = buf_o[k]
                buf_a[k - 1] = buf_a[k]
                buf_r[k - 1] = buf_r[k]
            count -= 1
        s, o = s2, o2
    ctx[0], ctx[1], ctx[2], ctx[3] = s, o, t, count


@numba.njit(cache=True)
def _evaluate_kernel(policy, U, env, num_actions, horizon, max_steps, max_episodes):
    """Roll out a fixed policy; returns (total reward, steps, finished episodes)."""
    terminal = env[8]
    total = 0.0
    steps = 0
    episodes = 0
    s, o, t = -1, 0, 0
    for i in range(U.shape[0]):
        if steps >= max_steps or episodes >= max_episodes:
            break
        if s < 0:
            s, o = _reset(env, U[i, 4], U[i, 5])
            t = 0
        a = _sample_probs(policy[o], U[i, 1])
        s2, o2, r = _transition(env, s, a, num_actions, U[i, 2], U[i, 3])
        t += 1
        steps += 1
        total += r
        if terminal[s2] or t >= horizon:
            episodes += 1
            s = -1
        else:
            s, o = s2, o2
    return total, steps, episodes


# ---------------------------------------------------------------------------
# Drivers


def _rngs(seed: int):
    train, evaluation = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(train), np.random.default_rng(evaluation)


def greedy_table(values: np.ndarray) -> np.ndarray:
    """One-hot greedy policy; ties go to the lowest action index."""
    table = np.zeros_like(values, dtype=float)
    table[np.arange(values.shape[0]), np.argmax(values, axis=1)] = 1.0
    return table


def epsilon_greedy_table(values: np.ndarray, eps: float) -> np.ndarray:
    A = values.shape[1]
    return (1.0 - eps) * greedy_table(values) + eps / A


def softmax_table(prefs: np.ndarray) -> np.ndarray:
    z = np.exp(prefs - prefs.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def evaluate_policy(env: CompiledEnv, table: np.ndarray, config: LearnerConfig,
                    rng: np.random.Generator) -> float:
    """Average episode return, or reward per 100 steps, of a fixed policy table."""
    table = np.ascontiguousarray(table, dtype=float)
    if config.eval_metric == "episode_return":
        if env.horizon == _NO_HORIZON:
            raise ConfigError("episode_return evaluation needs an environment horizon", "learner.eval_metric")
        rows = config.eval_episodes * env.horizon
        max_steps, max_episodes = rows, config.eval_episodes
    else:
        rows = max_steps = config.eval_steps
        max_episodes = np.iinfo(np.int64).max
    U = rng.random((rows, NUM_UNIFORMS))
    total, steps, episodes = _evaluate_kernel(table, U, env.arrays(), env.num_actions, env.horizon,
                                              max_steps, max_episodes)
    if config.eval_metric == "episode_return":
        return total / max(episodes, 1)
    return 100.0 * total / steps


def _initial_q(env: CompiledEnv, config: LearnerConfig) -> float:
    if config.q0 is not None:
        return float(config.q0)
    if config.gamma >= 1:
        raise ConfigError("optimistic q0 needs gamma < 1; set q0 explicitly", "learner.q0")
    return env.reward_max / (1.0 - config.gamma)


def _checkpoints(config: LearnerConfig):
    done = 0
    while done < config.total_steps:
        chunk = min(config.eval_every, config.total_steps - done)
        yield chunk
        done += chunk


def _train(env, config: LearnerConfig, seed: int, chunk_fn, policy_fn):
    env = compile_env(env)
    train_rng, eval_rng = _rngs(seed)
    record = RunRecord(seed=seed, config_hash=config.digest())
    record.add(0, evaluate_policy(env, policy_fn(), config, eval_rng))
    step = 0
    for chunk in _checkpoints(config):
        U = train_rng.random((chunk, NUM_UNIFORMS))
        chunk_fn(U)
        step += chunk
        record.add(step, evaluate_policy(env, policy_fn(), config, eval_rng))
    return record


def q_learning(env, config: LearnerConfig, seed: int = 0):
    """Tabular q-learning with epsilon-greedy exploration; returns ``(Q, RunRecord)``."""
    cenv = compile_env(env)
    Q = np.full((cenv.num_observations, cenv.num_actions), _initial_q(cenv, config))
    ctx = np.array([-1, 0, 0, 0], dtype=np.int64)

    def chunk_fn(U):
        _q_learning_chunk(Q, ctx, U, cenv.arrays(), cenv.num_actions, cenv.horizon,
                          config.epsilon, config.alpha, config.gamma)

    record = _train(cenv, config, seed, chunk_fn, lambda: _eval_table(Q, config, "q"))
    return Q, record


def _eval_table(values, config: LearnerConfig, kind: str) -> np.ndarray:
    if config.eval_mode == "greedy":
        return greedy_table(values)
    return softmax_table(values) if kind == "pi" else epsilon_greedy_table(values, config.epsilon)


def sarsa_lambda(env, config: LearnerConfig, seed: int = 0):
    """True online Sarsa(lambda); returns ``(Q, RunRecord)``."""
    cenv = compile_env(env)
    O, A = cenv.num_observations, cenv.num_actions
    Q = np.full((O, A), _initial_q(cenv, config))
    ctx = np.array([-1, 0, 0, 0], dtype=np.int64)
    z = np.zeros(O * A)
    active = np.zeros(O * A, dtype=np.int64)
    in_active = np.zeros(O * A, dtype=np.bool_)
    n_active = np.zeros(1, dtype=np.int64)
    q_old = np.zeros(1)

    def chunk_fn(U):
        _sarsa_chunk(Q, ctx, z, active, in_active, n_active, U, cenv.arrays(), A, cenv.horizon,
                     config.epsilon, config.alpha, config.gamma, config.lam, q_old)

    record = _train(cenv, config, seed, chunk_fn, lambda: _eval_table(Q, config, "q"))
    return Q, record


def sarsa_reference(env, config: LearnerConfig, seed: int = 0):
    """Plain-Python one-step Sarsa using the same random stream as :func:`sarsa_lambda`.

    Used to check that ``lam = 0`` is exactly one-step Sarsa.
    """
    cenv = compile_env(env)
    O, A = cenv.num_observations, cenv.num_actions
    Q = np.full((O, A), _initial_q(cenv, config))
    tptr, tnext, tcdf, treward, optr, oobs, ocdf, mucdf, terminal = cenv.arrays()
    state = {"s": -1, "o": 0, "t": 0, "a": 0}

    def search(cdf, lo, hi, u):
        for j in range(lo, hi):
            if u < cdf[j]:
                return j
        return hi - 1

    def choose(o, u_coin, u_action):
        if u_coin < config.epsilon:
            return min(int(u_action * A), A - 1)
        return int(np.argmax(Q[o]))

    def chunk_fn(U):
        s, o, t, a = state["s"], state["o"], state["t"], state["a"]
        for u in U:
            if s < 0:
                s = search(mucdf, 0, len(mucdf), u[4])
                o = oobs[search(ocdf, optr[s], optr[s + 1], u[5])]
                a = choose(o, u[6], u[7])
                t = 0
            row = s * A + a
            j = search(tcdf, tptr[row], tptr[row + 1], u[2])
            s2, r = tnext[j], treward[j]
            o2 = oobs[search(ocdf, optr[s2], optr[s2 + 1], u[3])]
            t += 1
            a2 = choose(o2, u[0], u[1])
            q_next = 0.0 if terminal[s2] else Q[o2, a2]
            delta = r + config.gamma * q_next - Q[o, a]
            Q[o, a] += config.alpha * delta
            if terminal[s2] or t >= cenv.horizon:
                s = -1
            else:
                s, o, a = s2, o2, a2
        state.update(s=s, o=o, t=t, a=a)

    record = _train(cenv, config, seed, chunk_fn, lambda: _eval_table(Q, config, "q"))
    return Q, record


def nstep_actor_critic(env, config: LearnerConfig, seed: int = 0):
    """n-step actor-critic with a tabular softmax actor; returns ``(StochasticPolicy, RunRecord)``.

    Preferences start at zero (uniform policy) and the critic at zero.  Each
    update uses the advantage ``G - V(o)`` of the n-step return ``G``.  Episodes
    that end flush the buffer with truncated returns; episodes cut by the horizon
    bootstrap from the critic.
    """
    cenv = compile_env(env)
    O, A = cenv.num_observations, cenv.num_actions
    theta = np.zeros((O, A))
    V = np.zeros(O)
    ctx = np.array([-1, 0, 0, 0], dtype=np.int64)
    buf_o = np.zeros(config.n, dtype=np.int64)
    buf_a = np.zeros(config.n, dtype=np.int64)
    buf_r = np.zeros(config.n)

    def chunk_fn(U):
        _actor_critic_chunk(theta, V, ctx, buf_o, buf_a, buf_r, U, cenv.arrays(), A, cenv.horizon,
                            config.n, config.gamma, config.actor_alpha, config.critic_alpha)

    record = _train(cenv, config, seed, chunk_fn, lambda: _eval_table(theta, config, "pi"))
    return StochasticPolicy(softmax_table(theta)), record


LEARNERS = {
    "q_learning": q_learning,
    "sarsa_lambda": sarsa_lambda,
    "nstep_actor_critic": nstep_actor_critic,
}


def run_learner(env, config: LearnerConfig, seed: int = 0):
    """Dispatch on ``config.algorithm``; returns ``(learned table or policy, RunRecord)``."""
    return LEARNERS[config.algorithm](env, config, seed)
