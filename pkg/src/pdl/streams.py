"""Deterministic, stream-labeled randomness.

Every random quantity in the package is drawn from a stream identified by a
(master_seed, label) pair.  Streams are derived through a counter-based
generator (Philox) keyed by a hash of the label, so distinct labels give
independent streams by construction and no stream is an offset of another.
Labels follow the hierarchy "model/entity/index/purpose", e.g.
"arw/site/17/stack" or "contact/run/3/log".

The environment variable PDL_MASTER_SEED (decimal 64-bit) overrides any
configured master seed.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1

# splitmix64 finalizer constants
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """splitmix64 finalizer; bijective scramble of a 64-bit integer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def label_hash(label: str) -> int:
    """Stable 64-bit hash of a stream label (sha256 based, not PYTHONHASHSEED)."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class SeedSpec:
    """Identifies one random stream: a master seed plus a structured label."""

    master_seed: int
    label: str

    def __post_init__(self):
        if not self.label:
            raise ValueError("stream label must be non-empty")
        if not 0 <= self.master_seed <= _MASK64:
            raise ValueError("master_seed must fit in 64 bits")

    def child(self, suffix: str) -> "SeedSpec":
        return SeedSpec(self.master_seed, f"{self.label}/{suffix}")


def derive_u64(seed: SeedSpec) -> int:
    """A single 64-bit value deterministic in (master_seed, label).

    Used to key the hashed instruction stacks; double-mixed so that related
    labels do not produce related values.
    """
    return mix64(mix64(seed.master_seed ^ _GOLDEN) ^ label_hash(seed.label))


def derive_stream(seed: SeedSpec) -> np.random.Generator:
    """Philox generator keyed by (master_seed, hash(label)).

    Re-derivation with the same SeedSpec yields an identical stream; the
    derivation itself is pure and safe to call concurrently.
    """
    key = np.array([seed.master_seed, label_hash(seed.label)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_exponential(stream: np.random.Generator, rate: float) -> float:
    """One draw from Exponential(rate)."""
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return stream.exponential(1.0 / rate)


def sample_poisson_points(
    stream: np.random.Generator, intensity: float, t0: float, t1: float
) -> np.ndarray:
    """Points of a Poisson process of the given intensity on [t0, t1], sorted.

    A zero-length window gives an empty array; an inverted window is an error.
    """
    if intensity <= 0:
        raise ValueError(f"intensity must be positive, got {intensity}")
    if t1 < t0:
        raise ValueError(f"inverted window [{t0}, {t1}]")
    if t1 == t0:
        return np.empty(0, dtype=np.float64)
    n = stream.poisson(intensity * (t1 - t0))
    pts = stream.uniform(t0, t1, size=n)
    pts.sort()
    return pts


def master_seed_from_env(default: int) -> int:
    """Resolve the master seed, honoring the PDL_MASTER_SEED override."""
    raw = os.environ.get("PDL_MASTER_SEED")
    if raw is None:
        return default
    value = int(raw)
    if not 0 <= value <= _MASK64:
        raise ValueError("PDL_MASTER_SEED must be a decimal 64-bit integer")
    return value
