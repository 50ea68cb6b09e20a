"""Deterministic random streams.

All randomness in the package flows through Philox4x64 counter-based
generators keyed by a SplitMix64 hash chain, so every stream is pinned down
by a small tuple of integers and reproduces bit-identically for the same
seed. Gaussians use an explicit Box-Muller transform on 53-bit uniforms
rather than a library sampler, which keeps the draw sequence independent of
the numpy Generator machinery.

Key design decisions:

- Stream identity is a word tuple, hashed with `mix64`. Codebook streams are
  keyed by (purpose tag, seed, layer, head, role tag), so per-head codebooks
  never share draws and a model never needs per-head seed bookkeeping.
- Batch size never changes the values drawn: requesting n samples always
  consumes the same stream prefix as requesting the first n of a larger
  batch. Codebook nesting (entry i of a size-96 codebook equals entry i of a
  size-192 codebook) falls out of this property.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Role bytes, also used by the serialized header.
ROLE_TAGS = {"K": 0x4B, "V": 0x56}

# Purpose tags giving unrelated streams disjoint key spaces.
TAG_SECONDARY = 0x5345434F
TAG_PROBE = 0x50524F42
TAG_SYNTH = 0x53594E54
TAG_ADDITIVE_FIRST = 0x41445631
TAG_ADDITIVE_SECOND = 0x41445632
TAG_ORACLE = 0x4F52434C


def splitmix64(z: int) -> int:
    """One SplitMix64 step (Steele, Lea, Flood 2014 constants)."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix64(*words: int) -> int:
    """Hash a tuple of integers to one 64-bit word.

    Chain rule: h starts at 0 and absorbs each word as
    h <- splitmix64(h ^ word). Negative words are masked to 64 bits.
    """
    h = 0
    for w in words:
        h = splitmix64(h ^ (int(w) & _MASK64))
    return h


class RandomStream:
    """A seekless forward-only stream of deterministic randomness.

    The Philox key is (mix64(words), mix64(words, 1)) and the counter starts
    at zero, so equal key words give equal streams on any platform.
    """

    def __init__(self, *key_words: int):
        self.key_words = tuple(int(w) for w in key_words)
        key = np.array(
            [mix64(*key_words), mix64(*key_words, 1)], dtype=np.uint64
        )
        self._bitgen = np.random.Philox(key=key)

    def raw(self, n: int) -> np.ndarray:
        """Next n raw 64-bit words."""
        if n <= 0:
            return np.empty(0, dtype=np.uint64)
        out = self._bitgen.random_raw(n)
        return np.atleast_1d(np.asarray(out, dtype=np.uint64))

    def uniform(self, n: int) -> np.ndarray:
        """n doubles in [0, 1): the top 53 bits of each raw word."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def gaussian(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller.

        Consumes 2*ceil(n/2) raw words r0, r1, ...; pair k maps
        u1 = ((r_{2k} >> 11) + 1) * 2^-53 in (0, 1] and
        u2 = (r_{2k+1} >> 11) * 2^-53 in [0, 1) to
        sqrt(-2 ln u1) * (cos(2 pi u2), sin(2 pi u2)).
        """
        m = (n + 1) // 2
        r = self.raw(2 * m)
        u1 = ((r[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (r[1::2] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        radial = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * m, dtype=np.float64)
        out[0::2] = radial * np.cos(theta)
        out[1::2] = radial * np.sin(theta)
        return out[:n]


def secondary_stream(seed: int, layer: int, head: int, role: str) -> RandomStream:
    """Stream feeding the secondary codebook for one (layer, head, role)."""
    return RandomStream(TAG_SECONDARY, seed, layer, head, ROLE_TAGS[role])


def probe_stream(probe_seed: int) -> RandomStream:
    """Stream feeding Monte-Carlo probe directions."""
    return RandomStream(TAG_PROBE, probe_seed)
