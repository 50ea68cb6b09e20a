"""Joint direction codebooks: 24 Hurwitz rotations of a seeded secondary set.

A joint codebook is the coset family {p * s} for p over the 24 unit Hurwitz
quaternions and s over a per-(layer, head, role) secondary codebook of
seeded Haar-uniform unit quaternions. Because left multiplication by a unit
quaternion is an isometry of the 3-sphere, the 24 cosets are 24 congruent
rotated copies of the secondary set: size * 24 effective codewords from
size stored parameters.

Flat codeword index: primary_index * size + secondary_index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .hurwitz import GROUP_ORDER, PrimaryCodebook, build_primary_codebook
from .kernels import nearest_scan
from .quat import UNIT_TOL, hamilton, haar_quaternions
from .rng import ROLE_TAGS, secondary_stream


@dataclass(frozen=True)
class SecondaryCodebook:
    """Seeded Haar-uniform unit quaternions for one (layer, head, role)."""

    entries: np.ndarray
    seed: int
    layer: int
    head: int
    role: str

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class JointCodebook:
    primary: PrimaryCodebook
    secondary: SecondaryCodebook
    codewords: np.ndarray

    @property
    def size(self) -> int:
        """Secondary codebook size (codewords.shape[0] == 24 * size)."""
        return self.secondary.size


def build_secondary(
    seed: int, layer: int, head: int, role: str, size: int
) -> SecondaryCodebook:
    """Draw the secondary codebook from its keyed stream.

    Entries are normalized 4-dim standard normals; the stream prefix
    property makes codebooks of different sizes nested, so growing size
    never discards learned indices.
    """
    if size < 1:
        raise InvalidArgument(f"codebook size must be >= 1, got {size}")
    if role not in ROLE_TAGS:
        raise InvalidArgument(f"role must be one of {sorted(ROLE_TAGS)}, got {role!r}")
    if layer < 0 or head < 0:
        raise InvalidArgument("layer and head must be nonnegative")
    entries = haar_quaternions(secondary_stream(seed, layer, head, role), size)
    return SecondaryCodebook(
        entries=entries, seed=seed, layer=layer, head=head, role=role
    )


def build_joint(
    primary: PrimaryCodebook, secondary: SecondaryCodebook
) -> JointCodebook:
    """All 24 * size products p * s, flat index p * size + s."""
    codewords = hamilton(
        primary.entries[:, None, :], secondary.entries[None, :, :]
    ).reshape(-1, 4)
    return JointCodebook(primary=primary, secondary=secondary, codewords=codewords)


def nearest(u: np.ndarray, joint: JointCodebook) -> tuple[int, int, float]:
    """Best (primary index, secondary index, cosine) for one unit direction.

    Exhaustive maximum inner product; ties resolve to the lowest flat index.
    """
    u = np.asarray(u, dtype=np.float64)
    n = float(np.sqrt((u * u).sum()))
    if abs(n - 1.0) > UNIT_TOL:
        raise InvalidArgument(f"direction must be unit-norm within {UNIT_TOL}")
    flat, cos = nearest_scan(u[None, :], joint.codewords)
    p, s = divmod(int(flat[0]), joint.size)
    return p, s, float(cos[0])


@dataclass
class CodebookBank:
    """Lazily built joint codebooks for one (seed, size) across heads.

    Encode, decode, and fused attention all pull per-(layer, head, role)
    codebooks from here so they are constructed once per process.
    """

    seed: int
    size: int
    primary: PrimaryCodebook = field(default_factory=build_primary_codebook)
    _cache: dict = field(default_factory=dict, repr=False)

    def joint(self, layer: int, head: int, role: str) -> JointCodebook:
        key = (layer, head, role)
        found = self._cache.get(key)
        if found is None:
            secondary = build_secondary(self.seed, layer, head, role, self.size)
            found = build_joint(self.primary, secondary)
            self._cache[key] = found
        return found


def effective_size(size: int) -> int:
    """Number of effective codewords for a secondary codebook size."""
    return GROUP_ORDER * size
