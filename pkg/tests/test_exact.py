import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memaug.augmentation import augment
from memaug.errors import CapacityError, UsageError
from memaug.exact import (
    closed_form_q_b1,
    detect_shortcuts,
    evaluate,
    exact_obs_q,
    exhaustive_policy_search,
    greedy_policy,
    idealized_improvement,
    occupancy,
    optimal_history_value,
    pi_local,
    recall_blue_policy,
    sufficiency_report,
    td_fixed_point,
    uniform_policy,
)
from memaug.environments.recall import build_four_action_recall
from memaug.pomdp import StochasticPolicy, TabularPomdp

from conftest import cached_env, cached_product, identity_mdp

# q-values of the uniform policy on the 4-action task with one bit, worked out by hand:
# b_i = (1/8) / (1 + 1/2) = 1/12, so Q0[a] = (column sum of r)/12 + (2/3)(row sum of r)/4
# and Q1[a] = (column sum of r)/4.  Rows are memory bits, entries env actions 1..4.
UNIFORM_B1_Q = np.array([
    [-11 / 12, 7 / 24, -35 / 24, -23 / 48],
    [-1.25, 0.5, -2.375, 0.5625],
])


def random_b1_policy(seed):
    return StochasticPolicy(np.random.default_rng(seed).dirichlet(np.ones(8), size=2))


def test_occupancy_conditionals_are_distributions():
    for name, spec in (("recall", "OA1"), ("four_action_recall", "B1"), ("gravity", "O1")):
        prod = cached_product(name, spec)
        occ = occupancy(prod, uniform_policy(prod))
        cond = occ.conditional[:, occ.visited]
        assert np.allclose(cond.sum(axis=0), 1.0, atol=1e-12)
        assert np.all(cond >= 0)


def test_uniform_b1_start_state_share():
    prod = cached_product("four_action_recall", "B1")
    cond = occupancy(prod, uniform_policy(prod)).conditional
    start = [i for i, (s, _m, _o) in enumerate(prod.components) if s == 0]
    # s* is seen once per episode with bit 0; the second step keeps bit 0 half the time
    assert cond[start, 0].sum() == pytest.approx(2 / 3, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_second_step_share_with_bit_zero(seed):
    prod = cached_product("four_action_recall", "B1")
    policy = random_b1_policy(seed)
    cond = occupancy(prod, policy).conditional
    p = policy.table.reshape(2, 4, 2)
    b = p[0, :, 0] / (1 + p[0, :, 0].sum())
    for i in range(4):
        rows = [k for k, (s, m, _o) in enumerate(prod.components) if s == i + 1 and m == 0]
        assert cond[rows, 0].sum() == pytest.approx(b[i], abs=1e-12)


def test_uniform_b1_q_table():
    prod = cached_product("four_action_recall", "B1")
    q = exact_obs_q(prod, uniform_policy(prod)).values.reshape(2, 4, 2)
    assert np.allclose(q[:, :, 0], UNIFORM_B1_Q, atol=1e-12)
    assert np.allclose(q[:, :, 1], UNIFORM_B1_Q, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_closed_form_matches_exact_evaluation(seed):
    task = cached_env("four_action_recall")
    prod = cached_product("four_action_recall", "B1")
    policy = random_b1_policy(seed)
    assert np.max(np.abs(closed_form_q_b1(task, policy).values - exact_obs_q(prod, policy).values)) < 1e-9


def test_closed_form_rejects_wrong_shape():
    with pytest.raises(UsageError):
        closed_form_q_b1(cached_env("four_action_recall"), StochasticPolicy.uniform(3, 8))


def test_pi_local_is_a_greedy_fixed_point():
    prod = cached_product("four_action_recall", "B1")
    policy = pi_local(prod)
    q = closed_form_q_b1(cached_env("four_action_recall"), policy).values
    # zero-based actions: pi_l plays action 1 then action 3
    assert q[0, 1 * 2 + 1] == pytest.approx(0.75, abs=1e-12)
    for a in (0, 2, 3):
        assert q[0, a * 2 + 1] == pytest.approx(0.5, abs=1e-12)
    assert np.array_equal(greedy_policy(q, 2), policy.table)
    assert evaluate(prod, policy).value == pytest.approx(0.75, abs=1e-12)


def test_zero_reward_q_is_zero():
    env = TabularPomdp(2, 1, 2, [0.0], [[[(1, 0, 1.0)], [(0, 0, 1.0)]], [[(0, 0, 1.0)], [(1, 0, 1.0)]]],
                       [[(0, 1.0)], [(0, 1.0)]], 0.9, [0.5, 0.5])
    assert np.all(exact_obs_q(env, StochasticPolicy.uniform(1, 2)).values == 0.0)


def test_unvisited_observation_has_zero_q():
    prod = cached_product("recall", "OA1")
    ev = evaluate(prod, recall_blue_policy(prod))
    assert not ev.occupancy.visited.all()
    assert np.all(ev.q.values[~ev.occupancy.visited] == 0.0)


@pytest.mark.parametrize("spec", ["B1", "B2", "B5"])
def test_improvement_stalls_with_binary_memory(spec):
    trace = idealized_improvement(cached_env("four_action_recall"), spec)
    assert trace.final_return == pytest.approx(0.75, abs=1e-6)
    assert trace.label == "suboptimal"


def test_improvement_with_oa1_reaches_one():
    trace = idealized_improvement(cached_env("four_action_recall"), "OA1")
    assert trace.final_return == pytest.approx(1.0, abs=1e-6)
    assert trace.converged and trace.label == "optimal"


def test_variant_recall_needs_two_pairs():
    env = cached_env("variant_recall")
    oa1 = idealized_improvement(env, "OA1")
    oa2 = idealized_improvement(env, "OA2")
    assert oa1.final_return < 3 - 1e-6
    assert oa2.final_return == pytest.approx(3.0, abs=1e-6)


@settings(max_examples=5, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_improvement_snapshots_are_policies_and_fixed_points(seed):
    prod = cached_product("four_action_recall", "B1")
    trace = idealized_improvement(cached_env("four_action_recall"), "B1", init_policy=random_b1_policy(seed))
    for pol in trace.policies:
        assert np.all(pol >= 0) and np.allclose(pol.sum(axis=1), 1.0, atol=1e-12)
    if trace.converged:
        final = StochasticPolicy(trace.final_policy)
        g = greedy_policy(evaluate(prod, final).q.values, 2)
        visited = occupancy(prod, final).visited
        assert np.max(np.abs(g[visited] - trace.final_policy[visited]).sum(axis=1)) / 2 < 1e-6


@settings(max_examples=5, deadline=None)
@given(scale=st.floats(1.0, 100.0))
def test_reward_scaling_leaves_improvement_unchanged(scale):
    base = cached_env("four_action_recall")
    doc = base.to_dict()
    doc["rewards"] = [scale * r for r in doc["rewards"]]
    scaled = TabularPomdp.from_dict(doc)
    t1 = idealized_improvement(base, "B1")
    t2 = idealized_improvement(scaled, "B1")
    assert len(t1.policies) == len(t2.policies)
    assert all(np.allclose(p, q, atol=1e-12) for p, q in zip(t1.policies, t2.policies))


def test_td_bootstraps_through_aliased_memory():
    prod = cached_product("recall", "OA1")
    blue = recall_blue_policy(prod)
    td = td_fixed_point(prod, blue).values
    mc = exact_obs_q(prod, blue).values
    empty = prod.env.encode_obs(0, 0)
    assert td[empty, prod.env.encode_action(1, 1)] == pytest.approx(0.95, abs=1e-9)
    assert td[empty, prod.env.encode_action(0, 1)] == pytest.approx(0.9025, abs=1e-9)
    assert mc[empty, prod.env.encode_action(1, 1)] == 0.0


def test_shortcut_detection_flags_the_aliased_action():
    prod = cached_product("recall", "OA1")
    shortcuts = detect_shortcuts(prod, recall_blue_policy(prod))
    flips = [s for s in shortcuts if s.flips_argmax]
    assert len(flips) == 1
    assert (flips[0].observation, flips[0].action) == (0, prod.env.encode_action(1, 1))
    assert flips[0].td_value > flips[0].mc_value


def test_more_shortcuts_with_binary_memory():
    oa1, b2 = cached_product("recall", "OA1"), cached_product("recall", "B2")
    assert len(detect_shortcuts(b2, recall_blue_policy(b2))) > len(detect_shortcuts(oa1, recall_blue_policy(oa1)))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_td_equals_monte_carlo_on_mdps(seed):
    mdp = identity_mdp(num_states=5, num_actions=3, discount=0.9, seed=seed)
    policy = StochasticPolicy(np.random.default_rng(seed + 1).dirichlet(np.ones(3), size=5))
    td = td_fixed_point(mdp, policy).values
    mc = exact_obs_q(mdp, policy).values
    assert np.max(np.abs(td - mc)) < 1e-9
    assert detect_shortcuts(mdp, policy) == []


def test_sufficiency_on_four_action_task():
    rep = sufficiency_report(cached_env("four_action_recall"))
    assert rep.u == 5 and rep.bk_bound == 5
    assert rep.complete


def test_sufficiency_on_mdp():
    rep = sufficiency_report(identity_mdp(), max_depth=4)
    assert rep.u == 1 and rep.oak_min_k == 1 and rep.ok_min_k == 1


def test_sufficiency_on_recall():
    rep = sufficiency_report(cached_env("recall"))
    assert rep.oak_min_k == 2


def test_sufficiency_capacity():
    with pytest.raises(CapacityError) as info:
        sufficiency_report(cached_env("gravity"), max_depth=30, max_nodes=100)
    assert info.value.partial is not None


def test_optimal_history_values():
    assert optimal_history_value(cached_env("recall")) == pytest.approx(0.95**2, abs=1e-12)
    assert optimal_history_value(cached_env("four_action_recall")) == pytest.approx(1.0, abs=1e-12)
    assert optimal_history_value(cached_env("variant_recall")) == pytest.approx(3.0, abs=1e-12)


def test_policy_search_memoryless_vs_memory():
    assert exhaustive_policy_search(cached_env("recall")).episode_return < 1.0
    res = exhaustive_policy_search(cached_product("recall", "OA1"))
    assert res.episode_return == pytest.approx(1.0, abs=1e-12)
    assert res.value == pytest.approx(0.95**2, abs=1e-12)
    variant = exhaustive_policy_search(augment(cached_env("variant_recall"), "OA1"))
    assert variant.episode_return == pytest.approx(3.0, abs=1e-12)


def test_policy_search_capacity():
    with pytest.raises(CapacityError):
        exhaustive_policy_search(cached_product("recall", "OA1"), cap=10)


def test_four_action_builder_is_fresh():
    # the cached environment is shared; a fresh build must agree with it
    assert build_four_action_recall().to_dict() == cached_env("four_action_recall").to_dict()
