import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memaug.augmentation import AugmentedEnv
from memaug.environments import gravity
from memaug.errors import CapacityError, ConfigError
from memaug.memories import (
    PUSH,
    SKIP,
    BufferCodec,
    make_bk,
    make_kk,
    make_memory,
    make_oak,
    make_ok,
    parse_memory_spec,
)
from memaug.pomdp import StochasticPolicy

from conftest import cached_env


def test_b1_states_and_initial_memory():
    mem = make_bk(1)
    assert mem.num_memory_states == 2 and mem.num_write_actions == 2
    assert mem.initial_dist == (1.0, 0.0)


def test_b2_write_sets_memory():
    mem = make_bk(2)
    for o, a, r, o2 in itertools.product(range(2), range(2), range(2), range(2)):
        assert mem.transition(0b01, 0b10, o, a, r, o2) == ((0b10, 1.0),)


def test_b3_write_count():
    assert make_bk(3).num_write_actions == 8


def test_bk_capacity():
    with pytest.raises(CapacityError):
        make_bk(21, max_states=10**6)


def test_kk_shift():
    mem = make_kk(2, num_observations=3)
    m = mem.codec.encode((None, 0))
    assert mem.slots(mem.next_memory(m, 0, 2, 0, 0, 1)) == (0, 2)
    assert mem.num_write_actions == 1
    assert mem.slots(mem.initial_dist.index(1.0)) == (None, None)


def test_ok_skip_is_noop_and_push_stores_pre_transition_observation():
    mem = make_ok(2, num_observations=3)
    for m in range(mem.num_memory_states):
        for o, o2 in itertools.product(range(3), range(3)):
            assert mem.next_memory(m, SKIP, o, 0, 0, o2) == m
    pushed = mem.next_memory(mem.codec.encode((None, 1)), PUSH, 2, 0, 0, 0)
    assert mem.slots(pushed) == (1, 2)


def test_oa1_recall_nodes():
    env = cached_env("recall")
    mem = make_memory("OA1", env.num_observations, env.num_actions)
    assert mem.num_memory_states == 4  # empty plus one node per action
    node2 = mem.next_memory(0, PUSH, 0, 1, 0, 0)
    assert mem.slots(node2) == (mem.item(0, 1),)
    assert mem.next_memory(node2, SKIP, 0, 2, 0, 0) == node2


def test_capacity_errors_for_buffers():
    with pytest.raises(CapacityError):
        make_ok(10, num_observations=25, max_states=10**6)
    with pytest.raises(CapacityError):
        make_oak(5, num_observations=25, num_actions=4, max_states=10**6)


def test_spec_parsing():
    assert parse_memory_spec("OA1") == ("OA", 1)
    assert parse_memory_spec("K6") == ("K", 6)
    assert parse_memory_spec("none") == ("none", 0)
    for bad in ("Z9", "B0", "OA", "b2", ""):
        with pytest.raises(ConfigError):
            parse_memory_spec(bad)


@pytest.mark.parametrize("spec", ["B1", "B2", "K1", "K2", "O1", "O2", "OA1", "OA2"])
def test_builtin_families_are_deterministic(spec):
    mem = make_memory(spec, num_observations=2, num_actions=2)
    assert sum(1 for p in mem.initial_dist if p > 0) == 1
    for m, w, o, a, r, o2 in itertools.product(
        range(mem.num_memory_states), range(mem.num_write_actions), range(2), range(2), range(2), range(2)
    ):
        (out,) = mem.transition(m, w, o, a, r, o2)
        assert out[1] == 1.0


@settings(max_examples=60, deadline=None)
@given(k=st.integers(1, 4), n=st.integers(1, 5))
def test_codec_round_trip(k, n):
    codec = BufferCodec(k, n)
    for index in range(codec.size):
        slots = codec.decode(index)
        assert codec.encode(slots) == index
        j = sum(x is not None for x in slots)
        assert all(x is None for x in slots[: k - j])


@settings(max_examples=60, deadline=None)
@given(k=st.integers(1, 4), n=st.integers(1, 4), items=st.lists(st.integers(0, 3), max_size=10))
def test_codec_push_matches_list_shift(k, n, items):
    codec = BufferCodec(k, n)
    index = 0
    buf = [None] * k
    for x in items:
        x %= n
        index = codec.push(index, x)
        buf = buf[1:] + [x]
        assert codec.decode(index) == tuple(buf)


def _random_walk(env, spec, steps, seed, write_policy=None):
    """Roll the wrapper forward; return the logged (o, a, w) and the memory sequence."""
    aug = AugmentedEnv.from_spec(env, spec)
    rng = np.random.default_rng(seed)
    s, x = aug.reset(rng)
    log, memories = [], [aug.decode_obs(x)[1]]
    for t in range(steps):
        if env.terminal[s]:
            break
        a = int(rng.integers(env.num_actions))
        w = int(rng.integers(aug.memory.num_write_actions)) if write_policy is None else write_policy
        o, m = aug.decode_obs(x)
        s, m2, _, x, _ = aug.step(s, x, aug.encode_action(a, w), rng)
        log.append((o, a, w))
        memories.append(m2)
    return aug.memory, log, memories


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_k_order_buffer_equals_last_k_observations(seed):
    mem, log, memories = _random_walk(cached_env("gravity"), "K3", 40, seed)
    for t in range(len(log)):
        history = [o for o, _, _ in log[: t + 1]]
        expected = ([None] * 3 + history)[-3:]
        assert mem.slots(memories[t + 1]) == tuple(expected)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_observation_buffer_never_fabricates(seed):
    mem, log, memories = _random_walk(cached_env("gravity"), "O2", 40, seed)
    pushed = []
    for t, (o, _a, w) in enumerate(log):
        if w == PUSH:
            pushed.append(o)
        expected = ([None] * 2 + pushed)[-2:]
        assert mem.slots(memories[t + 1]) == tuple(expected)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_observation_action_buffer_never_fabricates(seed):
    mem, log, memories = _random_walk(cached_env("gravity"), "OA2", 40, seed)
    pushed = []
    for t, (o, a, w) in enumerate(log):
        if w == PUSH:
            pushed.append(mem.item(o, a))
        assert mem.slots(memories[t + 1]) == tuple(([None] * 2 + pushed)[-2:])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_k_order_equals_always_push_observation_buffer(seed):
    mem_k, log_k, seq_k = _random_walk(cached_env("gravity"), "K2", 30, seed)
    mem_o, log_o, seq_o = _random_walk(cached_env("gravity"), "O2", 30, seed, write_policy=PUSH)
    assert [o for o, _, _ in log_k] == [o for o, _, _ in log_o]
    assert [mem_k.slots(m) for m in seq_k] == [mem_o.slots(m) for m in seq_o]


def test_gravity_o1_keeps_button_observation_until_next_push():
    env = cached_env("gravity")
    mem = make_memory("O1", env.num_observations, env.num_actions)
    button = gravity.cell_index(*gravity.BUTTON)
    m = mem.next_memory(0, PUSH, button, 0, 0, 3)
    for o in range(env.num_observations):
        m = mem.next_memory(m, SKIP, o, 0, 0, o)
    assert mem.slots(m) == (button,)


def test_uniform_policy_helper_shape():
    # guard against accidental reliance on a specific alphabet size in the O1 product
    aug = AugmentedEnv.from_spec(cached_env("gravity"), "O1")
    assert StochasticPolicy.uniform(aug.num_observations, aug.num_actions).table.shape == (26 * 25, 8)
