"""Exact oracles over small POMDPs.

Everything here enumerates rather than samples: observation-level q-values
weighted by the state occupancy of a policy, the idealized improvement loop
driven by those q-values, the one-step TD fixed point and the shortcuts it
creates, closed-form q-values for the 4-action recall task with one memory bit,
and brute-force belief enumeration for sufficiency bounds.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .augmentation import AugmentedEnv, ProductPomdp, augment
from .errors import CapacityError, UnsupportedConfigurationError, UsageError
from .memories import PUSH, SKIP, BinaryMemory, ObservationActionMemory
from .pomdp import (
    BELIEF_TOL,
    Belief,
    QTable,
    StochasticPolicy,
    TabularPomdp,
    _linear_q,
    backward_q,
    initial_belief,
    policy_value,
    predictive_observation_probs,
    state_policy,
    state_transition_under,
    update_belief,
)

TIE_RTOL = 1e-10
DEFAULT_EPSILON = 0.05
DEFAULT_MAX_ITERATIONS = 10_000
DEFAULT_CONVERGENCE_TOL = 1e-9
DEFAULT_POLICY_SEARCH_CAP = 10**7


# ---------------------------------------------------------------------------
# Occupancy and observation-level q-values


@dataclass(frozen=True)
class OccupancyProjection:
    """State occupancy of a policy and the induced ``P_pi(s|o)``.

    ``state_occupancy`` is the expected number of visits per episode when the
    POMDP has a horizon and the discounted occupancy otherwise.  ``per_step``
    holds the occupancy at each time step for finite horizons.  Columns of
    ``conditional`` (``S x O``) sum to 1 wherever ``obs_weight > 0``.
    """

    state_occupancy: np.ndarray
    obs_weight: np.ndarray
    conditional: np.ndarray
    per_step: np.ndarray | None = None

    @property
    def visited(self) -> np.ndarray:
        return self.obs_weight > 0


def _check_evaluable(pomdp: TabularPomdp):
    if pomdp.horizon is None and pomdp.discount >= 1.0:
        raise UnsupportedConfigurationError("occupancy needs a horizon or discount < 1")


def _project(pomdp: TabularPomdp, d: np.ndarray, per_step=None) -> OccupancyProjection:
    model = pomdp.__dict__.get("_dense_model")
    if model is not None:
        joint = model.omega * d[:, None]
    else:
        joint = pomdp.observation_matrix.multiply(d[:, None]).toarray()  # S x O
    weight = joint.sum(axis=0)
    cond = np.divide(joint, weight, out=np.zeros_like(joint), where=weight > 0)
    return OccupancyProjection(d, weight, cond, per_step)


def _per_step_occupancy(pomdp: TabularPomdp, pi_s: np.ndarray) -> np.ndarray:
    live = pomdp.nonterminal.astype(float)
    PT = state_transition_under(pomdp, pi_s).T.tocsr()
    d = pomdp.mu * live
    rows = [d]
    for _ in range(pomdp.horizon - 1):
        d = (PT @ d) * live
        rows.append(d)
    return np.array(rows)


def _discounted_occupancy(pomdp: TabularPomdp, pi_s: np.ndarray) -> np.ndarray:
    live = pomdp.nonterminal.astype(float)
    N = sp.diags(live)
    P = state_transition_under(pomdp, pi_s)
    system = (sp.identity(pomdp.num_states, format="csc") - pomdp.discount * (N @ P.T @ N)).tocsc()
    return np.atleast_1d(spla.spsolve(system, pomdp.mu * live))


def occupancy(pomdp: TabularPomdp, policy: StochasticPolicy) -> OccupancyProjection:
    """Occupancy of ``policy`` from ``mu`` over non-terminal states."""
    _check_evaluable(pomdp)
    pi_s = state_policy(pomdp, policy)
    if pomdp.horizon is not None:
        steps = _per_step_occupancy(pomdp, pi_s)
        return _project(pomdp, steps.sum(axis=0), steps)
    return _project(pomdp, _discounted_occupancy(pomdp, pi_s))


@dataclass(frozen=True)
class Evaluation:
    q: QTable
    occupancy: OccupancyProjection
    value: float


DENSE_LIMIT = 4_000_000


class _DenseModel:
    """Dense copies of a small POMDP's tables for fast repeated evaluation."""

    def __init__(self, pomdp: TabularPomdp):
        S, A = pomdp.num_states, pomdp.num_actions
        self.P = pomdp.transition_matrix.toarray().reshape(S, A, S)
        self.omega = pomdp.observation_matrix.toarray()
        self.r = np.asarray(pomdp.expected_reward)
        self.live = pomdp.nonterminal.astype(float)
        self.mu = np.asarray(pomdp.mu)


def _dense_model(pomdp: TabularPomdp):
    if pomdp.num_states**2 * pomdp.num_actions > DENSE_LIMIT:
        return None
    model = pomdp.__dict__.get("_dense_model")
    if model is None:
        model = _DenseModel(pomdp)
        pomdp.__dict__["_dense_model"] = model
    return model


def _evaluate_dense(pomdp: TabularPomdp, model: _DenseModel, table: np.ndarray) -> Evaluation:
    H, gamma = pomdp.horizon, pomdp.discount
    pi_s = model.omega @ table
    P_pi = np.einsum("sa,sat->st", pi_s, model.P)
    q = model.r * model.live[:, None]
    qs = [q]
    for _ in range(H - 1):
        v = (pi_s * q).sum(axis=1) * model.live
        q = (model.r + gamma * model.P @ v) * model.live[:, None]
        qs.append(q)
    d = model.mu * model.live
    steps = [d]
    weighted = d[:, None] * qs[H - 1]
    for t in range(1, H):
        d = (d @ P_pi) * model.live
        steps.append(d)
        weighted = weighted + d[:, None] * qs[H - 1 - t]
    steps = np.array(steps)
    occ = _project(pomdp, steps.sum(axis=0), steps)
    num = model.omega.T @ weighted
    w = occ.obs_weight
    q_obs = np.divide(num, w[:, None], out=np.zeros_like(num), where=w[:, None] > 0)
    value = float(model.mu @ (pi_s * qs[-1]).sum(axis=1))
    return Evaluation(QTable(q_obs), occ, value)


def evaluate(pomdp: TabularPomdp, policy: StochasticPolicy) -> Evaluation:
    """Observation-level q-values, occupancy and expected return of ``policy``.

    For finite horizons the hidden-state q-value depends on the steps left, so
    each visit is weighted by the q-value for its own time step:
    ``q(o,a) = sum_t sum_s d_t(s) omega(o|s) q_{H-t}(s,a) / sum_t sum_s d_t(s) omega(o|s)``.
    Unvisited observations get q = 0.
    """
    _check_evaluable(pomdp)
    if policy.table.shape != (pomdp.num_observations, pomdp.num_actions):
        raise ValueError(f"policy shape {policy.table.shape} does not match the POMDP")
    if pomdp.horizon is not None:
        model = _dense_model(pomdp)
        if model is not None:
            return _evaluate_dense(pomdp, model, policy.table)
    pi_s = state_policy(pomdp, policy)
    omega = pomdp.observation_matrix
    if pomdp.horizon is not None:
        H = pomdp.horizon
        qs = list(backward_q(pomdp, pi_s, H))
        steps = _per_step_occupancy(pomdp, pi_s)
        weighted = sum(steps[t][:, None] * qs[H - 1 - t] for t in range(H))
        occ = _project(pomdp, steps.sum(axis=0), steps)
        q_first = qs[-1]
    else:
        q_first = _linear_q(pomdp, pi_s)
        occ = _project(pomdp, _discounted_occupancy(pomdp, pi_s))
        weighted = occ.state_occupancy[:, None] * q_first
    num = np.asarray(omega.T @ weighted)
    w = occ.obs_weight
    q_obs = np.divide(num, w[:, None], out=np.zeros_like(num), where=w[:, None] > 0)
    value = float(pomdp.mu @ (pi_s * q_first).sum(axis=1))
    return Evaluation(QTable(q_obs), occ, value)


def exact_obs_q(pomdp: TabularPomdp, policy: StochasticPolicy) -> QTable:
    """``q_pi(o,a) = sum_s P_pi(s|o) q_pi(s,a)`` (zero rows for unvisited observations)."""
    return evaluate(pomdp, policy).q


# ---------------------------------------------------------------------------
# Closed form for the 4-action recall task with B1


def _four_action_rewards(task: TabularPomdp) -> np.ndarray:
    if (task.num_observations, task.num_actions, task.horizon) != (1, 4, 2):
        raise UsageError("closed form needs the 4-action, 2-step, single-observation recall task")
    start = int(np.argmax(task.mu))
    r = np.zeros((4, 4))
    R = np.asarray(task.rewards)
    for i in range(4):
        (s_i, _, _), = task.dynamics[start][i]
        for a in range(4):
            r[i, a] = sum(p * R[ridx] for _, ridx, p in task.dynamics[s_i][a])
    return r


def closed_form_q_b1(task: TabularPomdp, policy: StochasticPolicy) -> QTable:
    """Closed-form q-values of the 4-action recall task with a one-bit memory.

    ``policy`` acts on the B1-augmented task: rows are memory bits, columns are
    ``a * 2 + w``.  With ``p[m, a, w] = pi(<a,w>|m)``, ``b_i = p[0,i,0] / (1 + sum_j p[0,j,0])``
    and ``t_i = p[0,i,1] / sum_j p[0,j,1]``::

        Q0[a,w] = sum_i r[i,a] b_i + (1 - sum_i b_i) sum_i p^w_i r[a,i]
        Q1[a,w] = sum_i t_i r[i,a]

    where ``p^w_i = sum_v p[w,i,v]``.
    """
    r = _four_action_rewards(task)
    table = np.asarray(policy.table)
    if table.shape != (2, 8):
        raise UsageError(f"expected a B1 policy of shape (2, 8), got {table.shape}")
    p = table.reshape(2, 4, 2)
    b = p[0, :, 0] / (1.0 + p[0, :, 0].sum())
    marg = p.sum(axis=2)  # marg[w, i]
    q0 = (b @ r)[:, None] + (1.0 - b.sum()) * (r @ marg.T)  # [a, w]
    pushed = p[0, :, 1].sum()
    t = p[0, :, 1] / pushed if pushed > 0 else np.zeros(4)
    q1 = np.repeat((t @ r)[:, None], 2, axis=1)
    return QTable(np.vstack([q0.ravel(), q1.ravel()]))


# ---------------------------------------------------------------------------
# Greedy map and idealized improvement


def greedy_actions(q: np.ndarray, num_write_actions: int = 1, rtol: float = TIE_RTOL) -> np.ndarray:
    """Greedy pair-action per row.

    Values within ``rtol * max|q|`` of the row maximum count as ties.  Ties go to
    the lowest environment action, then to the highest write action.
    """
    q = np.asarray(q)
    tol = rtol * float(np.max(np.abs(q))) if q.size else 0.0
    best = q.max(axis=1, keepdims=True)
    tied = q >= best - tol
    out = np.empty(q.shape[0], dtype=int)
    W = num_write_actions
    for o in range(q.shape[0]):
        idx = np.flatnonzero(tied[o])
        env_actions = idx // W
        a = env_actions.min()
        out[o] = idx[env_actions == a].max()
    return out


def greedy_policy(q: np.ndarray, num_write_actions: int = 1, base: np.ndarray | None = None,
                  visited: np.ndarray | None = None) -> np.ndarray:
    """Deterministic greedy table; rows outside ``visited`` are copied from ``base``."""
    q = np.asarray(q)
    g = np.zeros_like(q)
    g[np.arange(q.shape[0]), greedy_actions(q, num_write_actions)] = 1.0
    if visited is not None and base is not None:
        g[~visited] = base[~visited]
    return g


@dataclass
class ImprovementTrace:
    """Policies, greedy targets and expected returns, one entry per iteration."""

    policies: list = field(default_factory=list)
    greedy: list = field(default_factory=list)
    returns: list = field(default_factory=list)
    converged: bool = False
    label: str = "none"
    optimal_value: float | None = None
    product: ProductPomdp | None = None

    @property
    def iterations(self) -> int:
        return len(self.returns)

    @property
    def final_return(self) -> float:
        return self.returns[-1]

    @property
    def final_policy(self) -> np.ndarray:
        return self.policies[-1]

    def rows(self):
        return [(i, r) for i, r in enumerate(self.returns)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "expected_return"])
        for i, r in self.rows():
            writer.writerow([i, repr(float(r))])
        return buf.getvalue()


def _total_variation(a: np.ndarray, b: np.ndarray, rows: np.ndarray) -> float:
    if not rows.any():
        return 0.0
    return float(0.5 * np.abs(a[rows] - b[rows]).sum(axis=1).max())


def improve(product: TabularPomdp, init_policy: StochasticPolicy | None = None,
            epsilon: float = DEFAULT_EPSILON, max_iterations: int = DEFAULT_MAX_ITERATIONS,
            tol: float = DEFAULT_CONVERGENCE_TOL, num_write_actions: int | None = None,
            optimal_value: float | None = None) -> ImprovementTrace:
    """Idealized improvement on an explicit POMDP (usually a product POMDP).

    Each iteration evaluates the current policy exactly, computes its greedy
    policy and moves ``pi <- (1 - epsilon) pi + epsilon pi_g`` on visited
    observations.  Stops once the largest total-variation gap between ``pi``
    and ``pi_g`` over visited observations falls below ``tol``.
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must be in (0, 1]")
    if num_write_actions is None:
        env = getattr(product, "env", None)
        num_write_actions = env.memory.num_write_actions if env is not None else 1
    pi = (init_policy.table if init_policy is not None
          else np.full((product.num_observations, product.num_actions), 1.0 / product.num_actions))
    pi = np.array(pi, dtype=float)
    trace = ImprovementTrace(product=product, optimal_value=optimal_value)
    for _ in range(max_iterations):
        ev = evaluate(product, StochasticPolicy(pi))
        visited = ev.occupancy.visited
        g = greedy_policy(ev.q.values, num_write_actions, base=pi, visited=visited)
        trace.policies.append(pi.copy())
        trace.greedy.append(g)
        trace.returns.append(ev.value)
        if _total_variation(pi, g, visited) < tol:
            trace.converged = True
            break
        nxt = (1.0 - epsilon) * pi + epsilon * g
        pi = np.where(visited[:, None], nxt, pi)
    if trace.converged and optimal_value is not None:
        trace.label = "optimal" if abs(trace.final_return - optimal_value) <= 1e-6 * max(1.0, abs(optimal_value)) else "suboptimal"
    return trace


def idealized_improvement(pomdp: TabularPomdp, memory_spec: str, epsilon: float = DEFAULT_EPSILON,
                          init_policy: StochasticPolicy | None = None,
                          max_iterations: int = DEFAULT_MAX_ITERATIONS,
                          tol: float = DEFAULT_CONVERGENCE_TOL) -> ImprovementTrace:
    """Run :func:`improve` on ``pomdp`` augmented with ``memory_spec``.

    The fixed point is labelled against the optimal history-based value of
    ``pomdp`` when that can be computed.
    """
    product = augment(pomdp, memory_spec)
    try:
        best = optimal_history_value(pomdp)
    except (UnsupportedConfigurationError, CapacityError):
        best = None
    return improve(product, init_policy, epsilon, max_iterations, tol,
                   product.env.memory.num_write_actions, best)


# ---------------------------------------------------------------------------
# TD fixed point and non-Markovian shortcuts


def td_fixed_point(pomdp: TabularPomdp, policy: StochasticPolicy) -> QTable:
    """Fixed point of one-step TD over observations.

    Solves ``Q(o,a) = rbar(o,a) + gamma sum_o' Pbar(o'|o,a) sum_a' pi(a'|o') Q(o',a')``
    over visited observations, with ``rbar`` and ``Pbar`` averaged over
    ``P_pi(s|o)``.  Successors that are terminal, or observations the policy
    never visits, contribute 0.
    """
    occ = occupancy(pomdp, policy)
    S, O, A = pomdp.num_states, pomdp.num_observations, pomdp.num_actions
    visited = np.flatnonzero(occ.visited)
    pos = {o: i for i, o in enumerate(visited)}
    n = len(visited) * A
    cond = occ.conditional[:, visited]  # S x V
    rbar = cond.T @ pomdp.expected_reward  # V x A

    live = pomdp.nonterminal.astype(float)
    omega = pomdp.observation_matrix.toarray()[:, visited] * live[:, None]  # S' x V
    P = pomdp.transition_matrix  # (S*A) x S
    pi_v = policy.table[visited]  # V x A
    rows, cols, vals = [], [], []
    for s in np.flatnonzero(cond.sum(axis=1) > 0):
        reach = np.asarray((P[s * A:(s + 1) * A] @ omega))  # A x V
        for vi in np.flatnonzero(cond[s] > 0):
            w = cond[s, vi]
            for a in range(A):
                for vj in np.flatnonzero(reach[a] > 0):
                    base = w * reach[a, vj]
                    for a2 in np.flatnonzero(pi_v[vj] > 0):
                        rows.append(vi * A + a)
                        cols.append(vj * A + a2)
                        vals.append(base * pi_v[vj, a2])
    M = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    system = (sp.identity(n, format="csc") - pomdp.discount * M).tocsc()
    with np.errstate(all="ignore"):
        sol = np.atleast_1d(spla.spsolve(system, rbar.ravel()))
    if not np.all(np.isfinite(sol)):
        raise UnsupportedConfigurationError("TD fixed point does not exist (singular system)")
    q = np.zeros((O, A))
    q[visited] = sol.reshape(len(visited), A)
    return QTable(q)


@dataclass(frozen=True)
class Shortcut:
    observation: int
    action: int
    td_value: float
    mc_value: float
    flips_argmax: bool

    def to_dict(self, pomdp: TabularPomdp | None = None) -> dict:
        doc = {
            "observation": self.observation,
            "action": self.action,
            "td_value": self.td_value,
            "mc_value": self.mc_value,
            "flips_argmax": self.flips_argmax,
        }
        if pomdp is not None and pomdp.observation_labels:
            doc["observation_label"] = pomdp.observation_labels[self.observation]
        if pomdp is not None and pomdp.action_labels:
            doc["action_label"] = pomdp.action_labels[self.action]
        return doc


def detect_shortcuts(pomdp: TabularPomdp, policy: StochasticPolicy, tol: float = 1e-6) -> list[Shortcut]:
    """(observation, action) pairs where TD and Monte-Carlo values disagree by more than ``tol``.

    A detection flips the argmax when its action is TD-greedy at its observation
    but not Monte-Carlo-greedy there (greedy under the usual tie-break).
    """
    ev = evaluate(pomdp, policy)
    mc = ev.q.values
    td = td_fixed_point(pomdp, policy).values
    env = getattr(pomdp, "env", None)
    W = env.memory.num_write_actions if env is not None else 1
    td_greedy = greedy_actions(td, W)
    mc_greedy = greedy_actions(mc, W)
    out = []
    for o in np.flatnonzero(ev.occupancy.visited):
        for a in range(pomdp.num_actions):
            if abs(td[o, a] - mc[o, a]) > tol:
                flip = bool(td_greedy[o] == a and mc_greedy[o] != a)
                out.append(Shortcut(int(o), int(a), float(td[o, a]), float(mc[o, a]), flip))
    return out


def shortcuts_to_json(pomdp: TabularPomdp, shortcuts: list[Shortcut]) -> str:
    return json.dumps([s.to_dict(pomdp) for s in shortcuts], indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Belief enumeration


def _belief_key(probs: np.ndarray) -> tuple:
    return tuple(np.round(probs, 12))


def _fully_terminal(pomdp: TabularPomdp, probs: np.ndarray) -> bool:
    return float(probs[pomdp.nonterminal].sum()) <= 0.0


def _require_depth(pomdp: TabularPomdp, max_depth):
    depth = max_depth if max_depth is not None else pomdp.horizon
    if depth is None:
        raise UnsupportedConfigurationError("belief enumeration needs a horizon or max_depth")
    return int(depth)


def optimal_history_value(pomdp: TabularPomdp, max_depth: int | None = None,
                          max_nodes: int = 10**6) -> float:
    """Optimal expected (discounted) return over history-based policies, by belief-tree search."""
    depth = _require_depth(pomdp, max_depth)
    r = pomdp.expected_reward
    gamma = pomdp.discount
    cache: dict = {}

    def value(probs: np.ndarray, h: int) -> float:
        if h == 0 or _fully_terminal(pomdp, probs):
            return 0.0
        key = (_belief_key(probs), h)
        if key in cache:
            return cache[key]
        if len(cache) >= max_nodes:
            raise CapacityError(f"belief tree exceeds {max_nodes} nodes")
        b = Belief(probs)
        best = -math.inf
        for a in range(pomdp.num_actions):
            total = float(probs @ r[:, a])
            pred = predictive_observation_probs(pomdp, b, a)
            for o in np.flatnonzero(pred > 0):
                nb = update_belief(pomdp, b, a, int(o))
                total += gamma * pred[o] * value(nb.probs, h - 1)
            best = max(best, total)
        cache[key] = best
        return best

    mu = pomdp.mu
    omega = pomdp.observation_matrix.toarray()
    p_obs = mu @ omega
    total = 0.0
    for o in np.flatnonzero(p_obs > 0):
        total += p_obs[o] * value(initial_belief(pomdp, int(o)).probs, depth)
    return float(total)


@dataclass
class SufficiencyReport:
    """Belief counts per observation and the memory sizes they imply."""

    beliefs_per_observation: dict
    u: int
    bk_bound: int
    ok_min_k: int | None
    oak_min_k: int | None
    k_max: int
    depth: int
    num_histories: int
    tolerance: float = BELIEF_TOL
    complete: bool = True

    def to_dict(self) -> dict:
        return {
            "u": self.u,
            "bk_bound": self.bk_bound,
            "ok_min_k": self.ok_min_k,
            "oak_min_k": self.oak_min_k,
            "beliefs_per_observation": {str(k): v for k, v in sorted(self.beliefs_per_observation.items())},
            "k_max": self.k_max,
            "depth": self.depth,
            "num_histories": self.num_histories,
            "tolerance": self.tolerance,
            "complete": self.complete,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _distinct(beliefs: list[np.ndarray], tol: float) -> list[np.ndarray]:
    reps: list[np.ndarray] = []
    for b in beliefs:
        if not any(np.max(np.abs(b - r)) <= tol for r in reps):
            reps.append(b)
    return reps


def _condition_holds(groups: dict, tol: float) -> bool:
    return all(len(_distinct(bs, tol)) <= 1 for bs in groups.values())


def bk_bound(num_observations: int, num_actions: int, u: int) -> int:
    """``ceil(log2 |O|) + ceil(log2 |A|) + ceil(log2 u)``."""
    clog = lambda n: math.ceil(math.log2(n)) if n > 1 else 0  # noqa: E731
    return clog(num_observations) + clog(num_actions) + clog(u)


def sufficiency_report(pomdp: TabularPomdp, max_depth: int | None = None, k_max: int = 3,
                       max_nodes: int = 10**6, tol: float = BELIEF_TOL) -> SufficiencyReport:
    """Enumerate reachable beliefs and check which memories can separate them.

    Histories are explored breadth-first up to ``max_depth`` decisions.  Two
    histories are merged when they share belief, current observation and the
    last ``k_max`` observation-action pairs, which is enough for everything
    reported.  Histories whose belief sits entirely on terminal states have
    ended and are not counted.

    The O/K condition holds for ``k`` when histories agreeing on the previous
    ``k`` observations and the current one share a belief; the OA condition is
    the same with observation-action pairs.  Shorter histories are padded, so a
    buffer that is not yet full counts as different from a full one.
    """
    depth = _require_depth(pomdp, max_depth)
    omega = pomdp.observation_matrix.toarray()
    p_obs = pomdp.mu @ omega
    pad = (None,) * k_max

    seen: set = set()
    frontier: deque = deque()
    records: list = []  # (belief, obs, window)

    def push(probs, o, window, d):
        key = (_belief_key(probs), o, window)
        if key in seen:
            return
        if len(seen) >= max_nodes:
            raise CapacityError(
                f"belief enumeration exceeds {max_nodes} histories",
                partial=_summarize(records, pomdp, k_max, depth, tol, complete=False),
            )
        seen.add(key)
        records.append((probs, o, window))
        frontier.append((probs, o, window, d))

    for o in np.flatnonzero(p_obs > 0):
        b = initial_belief(pomdp, int(o))
        if not _fully_terminal(pomdp, b.probs):
            push(b.probs, int(o), pad, 0)

    while frontier:
        probs, o, window, d = frontier.popleft()
        if d + 1 >= depth:
            continue
        b = Belief(probs)
        for a in range(pomdp.num_actions):
            pred = predictive_observation_probs(pomdp, b, a)
            nwin = (window + ((o, a),))[1:] if k_max else ()
            for o2 in np.flatnonzero(pred > 0):
                nb = update_belief(pomdp, b, a, int(o2)).probs
                if not _fully_terminal(pomdp, nb):
                    push(nb, int(o2), nwin, d + 1)

    return _summarize(records, pomdp, k_max, depth, tol, complete=True)


def _summarize(records, pomdp, k_max, depth, tol, complete) -> SufficiencyReport:
    by_obs: dict = {}
    for probs, o, _ in records:
        by_obs.setdefault(o, []).append(probs)
    counts = {o: len(_distinct(bs, tol)) for o, bs in by_obs.items()}
    u = max(counts.values(), default=0)

    def min_k(project):
        for k in range(1, k_max + 1):
            groups: dict = {}
            for probs, o, window in records:
                groups.setdefault((project(window[k_max - k:]), o), []).append(probs)
            if _condition_holds(groups, tol):
                return k
        return None

    ok_k = min_k(lambda w: tuple(None if x is None else x[0] for x in w))
    oak_k = min_k(lambda w: w)
    return SufficiencyReport(
        beliefs_per_observation=counts,
        u=u,
        bk_bound=bk_bound(pomdp.num_observations, pomdp.num_actions, max(u, 1)),
        ok_min_k=ok_k,
        oak_min_k=oak_k,
        k_max=k_max,
        depth=depth,
        num_histories=len(records),
        tolerance=tol,
        complete=complete,
    )


# ---------------------------------------------------------------------------
# Exhaustive search over deterministic memoryless policies


@dataclass(frozen=True)
class SearchResult:
    policy: StochasticPolicy
    value: float
    episode_return: float | None

    def __iter__(self):
        return iter((self.policy, self.value))


def exhaustive_policy_search(pomdp: TabularPomdp, cap: int = DEFAULT_POLICY_SEARCH_CAP) -> SearchResult:
    """Best deterministic memoryless policy by exact evaluation of every candidate.

    Candidates are ranked by expected discounted return; ties keep the
    lexicographically first policy.  ``episode_return`` is the undiscounted
    return of the winner when the POMDP has a horizon.
    """
    O, A = pomdp.num_observations, pomdp.num_actions
    if A**O > cap:
        raise CapacityError(f"{A}^{O} deterministic policies exceed the cap of {cap}")
    _check_evaluable(pomdp)
    best_val, best_actions = -math.inf, None
    for actions in itertools.product(range(A), repeat=O):
        pol = StochasticPolicy.deterministic(actions, A)
        val = evaluate(pomdp, pol).value
        if val > best_val + 1e-12:
            best_val, best_actions = val, actions
    policy = StochasticPolicy.deterministic(best_actions, A)
    ep = None
    if pomdp.horizon is not None:
        ep = policy_value(pomdp, policy, discounted=False)
    return SearchResult(policy, float(best_val), ep)


# ---------------------------------------------------------------------------
# Named policies


def uniform_policy(pomdp: TabularPomdp) -> StochasticPolicy:
    return StochasticPolicy.uniform(pomdp.num_observations, pomdp.num_actions)


def _deterministic_from_map(env: AugmentedEnv, choices: dict, default=(0, SKIP)) -> StochasticPolicy:
    actions = []
    for obs in range(env.num_observations):
        o, m = env.decode_obs(obs)
        a, w = choices.get(m, default)
        actions.append(env.encode_action(a, w))
    return StochasticPolicy.deterministic(actions, env.num_actions)


def recall_blue_policy(product: ProductPomdp) -> StochasticPolicy:
    """Deterministic policy that plays ``a1, a2, a3`` on the recall task through its memory.

    Supports OA1 (push every step, read the last action back) and B2 (count
    steps in binary).  Memory states the policy never reaches play ``<a1, skip>``.
    """
    env = product.env
    mem = env.memory
    if isinstance(mem, ObservationActionMemory) and mem.k == 1:
        choices = {mem.codec.encode((None,)): (0, PUSH)}
        for a in range(2):
            choices[mem.codec.encode((mem.item(0, a),))] = (a + 1, PUSH)
        return _deterministic_from_map(env, choices)
    if isinstance(mem, BinaryMemory) and mem.k == 2:
        return _deterministic_from_map(env, {0: (0, 1), 1: (1, 2), 2: (2, 3)})
    raise UsageError(f"no recall blue policy for memory {mem.spec}")


def pi_local(product: ProductPomdp) -> StochasticPolicy:
    """The locally optimal 4-action recall policy with B1: ``<1, 1>`` at memory 0, ``<3, 1>`` at memory 1."""
    mem = product.env.memory
    if not (isinstance(mem, BinaryMemory) and mem.k == 1):
        raise UsageError("pi_l is defined for the one-bit memory")
    return _deterministic_from_map(product.env, {0: (1, 1), 1: (3, 1)})


NAMED_POLICIES = {
    "uniform": uniform_policy,
    "blue": recall_blue_policy,
    "pi_l": pi_local,
}
