"""Seeded model of the noise space: i.i.d. uniform draws on [-eps, eps] indexed over all of Z.

Values are counter-based: draw(i) is a pure hash of (master_seed, i), so
negative indices (needed by backward correlations and the pullback of
equivariant densities) cost the same as positive ones, draws are independent
of access order, and ensembles can fan out across workers without sharing
generator state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_STREAM_SALT = 0x6A09E667F3BCC909
_DERIVE_SALT = 0xBB67AE8584CAA73B


def _splitmix64(z: int) -> int:
    z = (z + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _hash_pair(seed: int, index: int) -> int:
    # Two mixing rounds give full avalanche between seed and index lanes.
    h = _splitmix64((seed & _MASK) ^ _STREAM_SALT)
    h = _splitmix64(h ^ (index & _MASK))
    return h


def _splitmix64_np(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(_GAMMA)).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def derive_seed(master_seed: int, *indices: int) -> int:
    """Deterministic per-orbit (or per-task) seed from a master seed.

    Ensemble results stay independent of worker count because every orbit's
    stream depends only on (master_seed, orbit_index).
    """
    h = _splitmix64((master_seed & _MASK) ^ _DERIVE_SALT)
    for ix in indices:
        h = _splitmix64(h ^ (ix & _MASK))
    return h


def _to_unit(h: int) -> float:
    # [0, 1) with 53-bit resolution.
    return (h >> 11) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class NoiseStream:
    """Lazily indexable two-sided sequence of uniform draws on [-eps, eps].

    Immutable and cheap to share: `get` is a pure function of
    (master_seed, origin_offset + i).
    """

    master_seed: int
    eps: float
    origin_offset: int = 0

    def __post_init__(self) -> None:
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")

    def get(self, i: int) -> float:
        h = _hash_pair(self.master_seed, i + self.origin_offset)
        return self.eps * (2.0 * _to_unit(h) - 1.0)

    def values(self, start: int, count: int) -> np.ndarray:
        """Draws at indices start, ..., start+count-1 (vectorized)."""
        idx = (np.arange(start, start + count, dtype=np.int64) + self.origin_offset).astype(
            np.uint64
        )
        h0 = _splitmix64_np(
            np.full(idx.shape, (self.master_seed & _MASK) ^ _STREAM_SALT, dtype=np.uint64)
        )
        h = _splitmix64_np(h0 ^ idx)
        unit = (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        return self.eps * (2.0 * unit - 1.0)


def stream(master_seed: int, eps: float) -> NoiseStream:
    """Build a two-sided noise stream with uniform marginals on [-eps, eps]."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return NoiseStream(master_seed=int(master_seed), eps=float(eps))


def shift(s: NoiseStream, k: int) -> NoiseStream:
    """Shifted view: shift(s, k).get(i) == s.get(i + k)."""
    return NoiseStream(master_seed=s.master_seed, eps=s.eps, origin_offset=s.origin_offset + k)


def ensemble_noise(
    master_seed: int,
    eps: float,
    n_samples: int,
    n_steps: int,
    start: int = 0,
    sample_offset: int = 0,
) -> np.ndarray:
    """Matrix of draws, row i = orbit (sample_offset + i)'s noise at indices
    start..start+n_steps-1.

    Row i reproduces NoiseStream(derive_seed(master_seed, sample_offset + i),
    eps) exactly, so chunked ensembles agree with whole ones row for row.
    """
    base = _splitmix64_np(np.full(n_samples, (master_seed & _MASK) ^ _DERIVE_SALT, np.uint64))
    ids = np.arange(sample_offset, sample_offset + n_samples, dtype=np.int64).astype(np.uint64)
    seeds = _splitmix64_np(base ^ ids)
    idx = np.arange(start, start + n_steps, dtype=np.int64).astype(np.uint64)
    # _hash_pair inlined: first round mixes the per-orbit seed, second the index.
    h0 = _splitmix64_np(seeds ^ np.uint64(_STREAM_SALT))
    h = _splitmix64_np(h0[:, None] ^ idx[None, :])
    unit = (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    return eps * (2.0 * unit - 1.0)
