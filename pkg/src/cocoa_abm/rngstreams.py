"""Counter-based random streams.

Every draw is a pure function of ``(master_seed, domain, entity_id, counter)``:
the stream key is obtained by hashing the seed, the domain label and the
entity id, and the ``counter``-th value is a SplitMix64-style hash of the key
and the counter. Nothing is shared between streams, so drawing from the App
domain can never shift the values seen by the Schedule or Epidemic domains.

Counter consumption per call:

* ``next_uniform``   -- 1
* ``next_bernoulli`` -- 1 (``u < p``)
* ``next_gaussian``  -- 2 (Box-Muller, cosine branch:
  ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

_MASK64 = (1 << 64) - 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ENTITY_MUL = np.uint64(0xD6E8FEB86659FD93)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV_2_53 = 1.0 / 9007199254740992.0


class Domain(enum.IntEnum):
    """Label separating the independent families of streams."""

    INIT = 0
    SCHEDULE = 1
    EPIDEMIC = 2
    HOSPITAL = 3
    APP = 4


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_key(seed, label, entity):
    """Hash ``(seed, label, entity)`` into a 64-bit stream key.

    ``seed`` must already be a ``uint64``; ``label`` and ``entity`` are
    non-negative integers.
    """
    k = mix64(seed + _GOLDEN * np.uint64(label + 1))
    return mix64(k ^ (np.uint64(entity) * _ENTITY_MUL + _GOLDEN))


@njit(cache=True, inline="always")
def uniform_at(key, counter):
    """Value number ``counter`` of the stream with the given key, in [0, 1)."""
    z = mix64(key ^ (_GOLDEN * np.uint64(counter + 1)))
    z = mix64(z + key)
    return np.float64(z >> _S11) * _INV_2_53


@njit(cache=True)
def gaussian_at(key, counter, mean, std):
    """Box-Muller normal from counters ``counter`` and ``counter + 1``."""
    u1 = uniform_at(key, counter)
    u2 = uniform_at(key, counter + 1)
    r = math.sqrt(-2.0 * math.log(1.0 - u1))
    return mean + std * r * math.cos(2.0 * math.pi * u2)


@njit(cache=True)
def _fill_uniforms(key, start, out):
    for i in range(out.size):
        out[i] = uniform_at(key, start + i)


@njit(cache=True)
def entity_keys(seed, label, n):
    """Stream keys for entities ``0..n-1`` of one domain."""
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        out[i] = stream_key(seed, label, i)
    return out


def as_seed(master_seed: int) -> np.uint64:
    """Reduce any Python integer to the 64-bit seed space."""
    return np.uint64(int(master_seed) & _MASK64)


@dataclass
class RngStream:
    """A position in one counter-based stream. Draws advance ``counter``."""

    master_seed: int
    domain_label: Domain
    entity_id: int
    counter: int = 0

    def __post_init__(self):
        if self.entity_id < 0:
            raise ValueError("entity_id must be non-negative")
        self.domain_label = Domain(self.domain_label)
        self._key = np.uint64(stream_key(as_seed(self.master_seed), int(self.domain_label),
                                         int(self.entity_id)))

    @property
    def key(self) -> np.uint64:
        return self._key

    def next_uniform(self) -> float:
        u = uniform_at(self._key, self.counter)
        self.counter += 1
        return float(u)

    def next_gaussian(self, mean: float = 0.0, std: float = 1.0) -> float:
        if not std >= 0:
            raise ValueError(f"std must be >= 0, got {std}")
        g = gaussian_at(self._key, self.counter, float(mean), float(std))
        self.counter += 2
        return float(g)

    def next_bernoulli(self, p: float) -> bool:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p out of [0,1]: {p}")
        return self.next_uniform() < p

    def take(self, n: int) -> np.ndarray:
        """``n`` consecutive uniforms as an array; advances the counter by ``n``."""
        out = np.empty(int(n), dtype=np.float64)
        _fill_uniforms(self._key, self.counter, out)
        self.counter += int(n)
        return out

    def at(self, counter: int) -> "RngStream":
        """Copy of this stream positioned at ``counter``."""
        return RngStream(self.master_seed, self.domain_label, self.entity_id, counter)


def derive_stream(master_seed: int, domain_label: Domain, entity_id: int) -> RngStream:
    return RngStream(master_seed, Domain(domain_label), entity_id, 0)


def next_uniform(s: RngStream) -> float:
    return s.next_uniform()


def next_gaussian(s: RngStream, mean: float, std: float) -> float:
    return s.next_gaussian(mean, std)


def next_bernoulli(s: RngStream, p: float) -> bool:
    return s.next_bernoulli(p)
