"""External memory modules ``<M, W, Gamma, eta>`` and the built-in families.

Families:

* ``B{k}``  -- k writable bits; the write action *is* the next memory.
* ``K{k}``  -- k-order buffer; always shifts in the current observation.
* ``O{k}``  -- gated observation buffer; ``push`` shifts in the current observation,
  ``skip`` leaves the buffer alone.
* ``OA{k}`` -- gated buffer of (observation, environment action) pairs.

Buffers are kept in empty-prefix canonical form: a buffer holding ``j < k`` items
is ``(∅,)*(k-j) + items``.  Memory states are enumerated eagerly into a dense
index; ``max_states`` guards the enumeration.
"""

from __future__ import annotations

import re
from typing import Sequence

import numpy as np

from .errors import CapacityError, ConfigError

DEFAULT_MAX_MEMORY_STATES = 10**6

SKIP = 0
PUSH = 1

EMPTY = "∅"


class MemoryModule:
    """Base external memory.

    Subclasses implement :meth:`transition`, which returns the distribution
    ``Gamma(.|m, w, o, a, r, o')`` as a tuple of ``(m', prob)`` pairs over indices.
    """

    family = "generic"

    def __init__(self, num_memory_states, num_write_actions, initial_dist, k=0,
                 num_observations=None, num_actions=None):
        self.num_memory_states = int(num_memory_states)
        self.num_write_actions = int(num_write_actions)
        self.initial_dist = tuple(float(p) for p in initial_dist)
        self.k = int(k)
        self.num_observations = num_observations
        self.num_actions = num_actions
        if len(self.initial_dist) != self.num_memory_states:
            raise ValueError("initial distribution length must equal the number of memory states")
        if abs(sum(self.initial_dist) - 1.0) > 1e-12 or min(self.initial_dist) < 0:
            raise ValueError("initial memory distribution must be a probability vector")

    @property
    def spec(self) -> str:
        return "none" if self.family == "none" else f"{self.family}{self.k}"

    @property
    def deterministic(self) -> bool:
        return False

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec} |M|={self.num_memory_states} |W|={self.num_write_actions}>"

    def transition(self, m, w, o, a, r, o_next):
        raise NotImplementedError

    def sample_transition(self, m, w, o, a, r, o_next, rng: np.random.Generator) -> int:
        outcomes = self.transition(m, w, o, a, r, o_next)
        u = rng.random()
        acc = 0.0
        for nm, p in outcomes:
            acc += p
            if u < acc:
                return nm
        return outcomes[-1][0]

    def sample_initial(self, rng: np.random.Generator) -> int:
        u = rng.random()
        acc = 0.0
        for m, p in enumerate(self.initial_dist):
            acc += p
            if u < acc and p > 0:
                return m
        return max(m for m, p in enumerate(self.initial_dist) if p > 0)

    def memory_label(self, m: int) -> str:
        return str(m)

    def write_label(self, w: int) -> str:
        return str(w)


class _DeterministicMemory(MemoryModule):
    """Memory whose Gamma and eta put all mass on a single outcome."""

    initial_memory = 0

    def __init__(self, num_memory_states, num_write_actions, k, num_observations=None, num_actions=None):
        eta = [0.0] * num_memory_states
        eta[self.initial_memory] = 1.0
        super().__init__(num_memory_states, num_write_actions, eta, k, num_observations, num_actions)

    @property
    def deterministic(self) -> bool:
        return True

    def next_memory(self, m, w, o, a, r, o_next) -> int:
        raise NotImplementedError

    def transition(self, m, w, o, a, r, o_next):
        return ((self.next_memory(m, w, o, a, r, o_next), 1.0),)

    def sample_transition(self, m, w, o, a, r, o_next, rng=None) -> int:
        return self.next_memory(m, w, o, a, r, o_next)

    def sample_initial(self, rng=None) -> int:
        return self.initial_memory


class NoMemory(_DeterministicMemory):
    family = "none"

    def __init__(self):
        super().__init__(1, 1, 0)

    def next_memory(self, m, w, o, a, r, o_next):
        return 0

    def memory_label(self, m):
        return "-"

    def write_label(self, w):
        return "-"


class BinaryMemory(_DeterministicMemory):
    """``B{k}``: ``M = W = {0,1}^k``, ``eta(0^k) = 1``, ``m' = w``."""

    family = "B"

    def __init__(self, k: int, max_states: int = DEFAULT_MAX_MEMORY_STATES):
        if k < 1:
            raise ValueError("k must be >= 1")
        if 2**k > max_states:
            raise CapacityError(f"B{k} needs {2**k} memory states (cap {max_states})")
        super().__init__(2**k, 2**k, k)

    def next_memory(self, m, w, o, a, r, o_next):
        return w

    def memory_label(self, m):
        return format(m, f"0{self.k}b")

    def write_label(self, w):
        return format(w, f"0{self.k}b")


class BufferCodec:
    """Bijection between canonical buffers and ``[0, size)``.

    A buffer is a tuple of ``k`` slots, each ``None`` (empty) or an item in
    ``[0, n)``; empty slots only form a prefix.  Buffers are ordered by fill
    level, then base-``n`` value with the oldest item most significant.
    """

    def __init__(self, k: int, n: int):
        self.k = k
        self.n = n
        self.offsets = [0]
        for j in range(k + 1):
            self.offsets.append(self.offsets[-1] + n**j)
        self.size = self.offsets[-1]

    def fill(self, index: int) -> int:
        for j in range(self.k + 1):
            if index < self.offsets[j + 1]:
                return j
        raise IndexError(index)

    def encode(self, slots: Sequence) -> int:
        if len(slots) != self.k:
            raise ValueError(f"buffer must have {self.k} slots")
        items = [x for x in slots if x is not None]
        j = len(items)
        if any(x is not None for x in slots[: self.k - j]):
            raise ValueError("empty slots must form a prefix")
        value = 0
        for x in items:
            if not 0 <= x < self.n:
                raise ValueError(f"item {x} out of range")
            value = value * self.n + x
        return self.offsets[j] + value

    def decode(self, index: int) -> tuple:
        if not 0 <= index < self.size:
            raise IndexError(index)
        j = self.fill(index)
        value = index - self.offsets[j]
        items = []
        for _ in range(j):
            value, x = divmod(value, self.n)
            items.append(x)
        return (None,) * (self.k - j) + tuple(reversed(items))

    def push(self, index: int, item: int) -> int:
        """Shift ``item`` into the buffer, dropping the oldest item when full."""
        j = self.fill(index)
        value = index - self.offsets[j]
        if j < self.k:
            return self.offsets[j + 1] + value * self.n + item
        return self.offsets[j] + (value % self.n ** (self.k - 1)) * self.n + item


class _BufferMemory(_DeterministicMemory):
    def __init__(self, k, item_count, num_write_actions, num_observations, num_actions, max_states):
        if k < 1:
            raise ValueError("k must be >= 1")
        codec = BufferCodec(k, item_count)
        if codec.size > max_states:
            raise CapacityError(
                f"{self.family}{k} needs {codec.size} memory states (cap {max_states})"
            )
        self.codec = codec
        super().__init__(codec.size, num_write_actions, k, num_observations, num_actions)

    def slots(self, m: int) -> tuple:
        return self.codec.decode(m)

    def _item_label(self, x):
        return f"o{x}"

    def memory_label(self, m):
        slots = self.codec.decode(m)
        return "<" + ",".join(EMPTY if x is None else self._item_label(x) for x in slots) + ">"

    def write_label(self, w):
        return "push" if w == PUSH else "skip"


class KOrderMemory(_BufferMemory):
    """``K{k}``: single write action; always shifts in the current observation."""

    family = "K"

    def __init__(self, k: int, num_observations: int, max_states: int = DEFAULT_MAX_MEMORY_STATES):
        super().__init__(k, num_observations, 1, num_observations, None, max_states)

    def next_memory(self, m, w, o, a, r, o_next):
        return self.codec.push(m, o)

    def write_label(self, w):
        return "push"


class ObservationMemory(_BufferMemory):
    """``O{k}``: ``W = {skip, push}``; ``push`` shifts in the pre-transition observation."""

    family = "O"

    def __init__(self, k: int, num_observations: int, max_states: int = DEFAULT_MAX_MEMORY_STATES):
        super().__init__(k, num_observations, 2, num_observations, None, max_states)

    def next_memory(self, m, w, o, a, r, o_next):
        return self.codec.push(m, o) if w == PUSH else m


class ObservationActionMemory(_BufferMemory):
    """``OA{k}``: like ``O{k}`` but slots hold ``(o, a)`` with ``a`` the executed action."""

    family = "OA"

    def __init__(self, k: int, num_observations: int, num_actions: int,
                 max_states: int = DEFAULT_MAX_MEMORY_STATES):
        super().__init__(k, num_observations * num_actions, 2, num_observations, num_actions, max_states)

    def item(self, o: int, a: int) -> int:
        return o * self.num_actions + a

    def split_item(self, x: int) -> tuple[int, int]:
        return divmod(x, self.num_actions)

    def next_memory(self, m, w, o, a, r, o_next):
        return self.codec.push(m, self.item(o, a)) if w == PUSH else m

    def _item_label(self, x):
        o, a = self.split_item(x)
        return f"(o{o},a{a})"


class TabularMemory(MemoryModule):
    """Memory with an arbitrary (possibly stochastic) writing distribution.

    ``gamma_fn(m, w, o, a, r, o_next)`` must return ``(m', prob)`` pairs.
    """

    def __init__(self, num_memory_states, num_write_actions, initial_dist, gamma_fn, name="custom"):
        super().__init__(num_memory_states, num_write_actions, initial_dist)
        self._gamma_fn = gamma_fn
        self.family = name

    @property
    def spec(self):
        return self.family

    def transition(self, m, w, o, a, r, o_next):
        return tuple((int(nm), float(p)) for nm, p in self._gamma_fn(m, w, o, a, r, o_next) if p > 0)


def make_bk(k: int, max_states: int = DEFAULT_MAX_MEMORY_STATES) -> BinaryMemory:
    return BinaryMemory(k, max_states)


def make_kk(k: int, num_observations: int, max_states: int = DEFAULT_MAX_MEMORY_STATES) -> KOrderMemory:
    return KOrderMemory(k, num_observations, max_states)


def make_ok(k: int, num_observations: int, max_states: int = DEFAULT_MAX_MEMORY_STATES) -> ObservationMemory:
    return ObservationMemory(k, num_observations, max_states)


def make_oak(k: int, num_observations: int, num_actions: int,
             max_states: int = DEFAULT_MAX_MEMORY_STATES) -> ObservationActionMemory:
    return ObservationActionMemory(k, num_observations, num_actions, max_states)


_SPEC_RE = re.compile(r"^(OA|B|K|O)([1-9][0-9]*)$")


def parse_memory_spec(spec: str) -> tuple[str, int]:
    """``"OA1" -> ("OA", 1)``; ``"none" -> ("none", 0)``."""
    if not isinstance(spec, str):
        raise ConfigError(f"memory spec must be a string, got {spec!r}", "memory")
    if spec.lower() == "none":
        return "none", 0
    match = _SPEC_RE.match(spec)
    if match is None:
        raise ConfigError(f"unknown memory spec {spec!r} (expected none, B<k>, K<k>, O<k> or OA<k>)", "memory")
    return match.group(1), int(match.group(2))


def make_memory(spec: str, num_observations: int, num_actions: int,
                max_states: int = DEFAULT_MAX_MEMORY_STATES) -> MemoryModule:
    """Build a memory for a POMDP with the given alphabet sizes from its spec string."""
    family, k = parse_memory_spec(spec)
    if family == "none":
        return NoMemory()
    if family == "B":
        return make_bk(k, max_states)
    if family == "K":
        return make_kk(k, num_observations, max_states)
    if family == "O":
        return make_ok(k, num_observations, max_states)
    return make_oak(k, num_observations, num_actions, max_states)
