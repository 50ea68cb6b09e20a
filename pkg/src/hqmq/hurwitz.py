"""The 24 unit Hurwitz quaternions as a primary direction codebook.

The unit Hurwitz quaternions form the binary tetrahedral group under the
Hamilton product: the 8 axis elements +-1, +-i, +-j, +-k plus the 16
half-integer elements (+-1 +- i +- j +- k)/2. Geometrically they are the
vertices of the 24-cell, the optimal known packing of 24 points on the unit
3-sphere. Every component is 0, +-1/2, or +-1, all exactly representable in
binary floating point, so group checks below use exact comparisons.

Canonical index order (fixed, load-bearing for serialized codes):
  0..7   +1, -1, +i, -i, +j, -j, +k, -k
  8..23  half-integer elements by sign pattern (s_w, s_x, s_y, s_z) in
         binary order, bit value 0 mapping to + and 1 to -, w the most
         significant bit: (+,+,+,+), (+,+,+,-), ..., (-,-,-,-).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quat import hamilton

GROUP_ORDER = 24


def _build_entries() -> np.ndarray:
    entries = np.zeros((GROUP_ORDER, 4), dtype=np.float64)
    for axis in range(4):
        entries[2 * axis, axis] = 1.0
        entries[2 * axis + 1, axis] = -1.0
    for bits in range(16):
        signs = [1.0 if not (bits >> (3 - k)) & 1 else -1.0 for k in range(4)]
        entries[8 + bits] = np.array(signs) * 0.5
    return entries


@dataclass(frozen=True)
class PrimaryCodebook:
    """The 24 unit Hurwitz quaternions in canonical order."""

    entries: np.ndarray

    def index_of(self, q: np.ndarray) -> int:
        """Exact lookup of a group element's canonical index."""
        key = tuple(float(c) for c in q)
        try:
            return self._lookup[key]
        except KeyError:
            raise KeyError(f"{q!r} is not a unit Hurwitz quaternion") from None

    @property
    def _lookup(self) -> dict[tuple[float, ...], int]:
        table = self.__dict__.get("_lookup_cache")
        if table is None:
            table = {tuple(row): i for i, row in enumerate(self.entries.tolist())}
            object.__setattr__(self, "_lookup_cache", table)
        return table


@dataclass(frozen=True)
class GroupReport:
    """Result of an exhaustive group-structure check."""

    closure: bool
    identity_index: int
    inverse_index: tuple[int, ...]
    angle_histogram: dict[int, int]

    @property
    def min_angle_deg(self) -> int:
        return min(self.angle_histogram)

    @property
    def ok(self) -> bool:
        return (
            self.closure
            and self.identity_index == 0
            and self.min_angle_deg == 60
            and set(self.angle_histogram) <= {60, 90, 120, 180}
        )


def build_primary_codebook() -> PrimaryCodebook:
    return PrimaryCodebook(entries=_build_entries())


def verify_group(codebook: PrimaryCodebook) -> GroupReport:
    """Exhaustively verify the binary tetrahedral group structure.

    Products of elements have components that are quarter-integer sums, all
    exact in float64, so the 24x24 closure table is checked with exact
    component matching rather than tolerances.
    """
    entries = codebook.entries
    n = entries.shape[0]

    closure = True
    identity = np.array([1.0, 0.0, 0.0, 0.0])
    identity_index = codebook.index_of(identity)
    inverse_index = [-1] * n
    for a in range(n):
        for b in range(n):
            prod = hamilton(entries[a], entries[b])
            try:
                k = codebook.index_of(prod)
            except KeyError:
                closure = False
                continue
            if k == identity_index:
                inverse_index[a] = b

    histogram: dict[int, int] = {}
    dots = entries @ entries.T
    for a in range(n):
        for b in range(a + 1, n):
            deg = int(round(np.degrees(np.arccos(np.clip(dots[a, b], -1, 1)))))
            histogram[deg] = histogram.get(deg, 0) + 1

    return GroupReport(
        closure=closure,
        identity_index=identity_index,
        inverse_index=tuple(inverse_index),
        angle_histogram=histogram,
    )
