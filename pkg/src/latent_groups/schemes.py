"""Two-group partitions of the grouping factor's levels.

A scheme is stored as a K-bit mask of the levels placed in group 2; bit
``k - 1`` stands for level ``k``.  The canonical orientation keeps level 1 in
group 1, so the bit for level 1 is always clear and each unordered partition
has exactly one representation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True, order=True)
class GroupingScheme:
    K: int
    mask: int

    def __post_init__(self):
        full = (1 << self.K) - 1
        if self.K < 2 or not (0 < self.mask < full):
            raise ContractViolation(f"mask {self.mask:#b} is not a two-group split of {self.K} levels")
        if self.mask & 1:
            object.__setattr__(self, "mask", full ^ self.mask)

    @classmethod
    def from_groups(cls, K: int, group1, group2=None) -> GroupingScheme:
        g1 = set(group1)
        g2 = set(range(1, K + 1)) - g1 if group2 is None else set(group2)
        if g1 & g2 or g1 | g2 != set(range(1, K + 1)):
            raise ContractViolation(f"groups {sorted(g1)} / {sorted(g2)} do not partition 1..{K}")
        return cls(K, sum(1 << (k - 1) for k in g2))

    @classmethod
    def from_label(cls, label: str, K: int | None = None) -> GroupingScheme:
        left, sep, right = label.partition(":")
        if not sep:
            raise ContractViolation(f"scheme label {label!r} has no ':'")
        g1 = [int(v) for v in left.split(",")]
        g2 = [int(v) for v in right.split(",")]
        return cls.from_groups(K or max(g1 + g2), g1, g2)

    @property
    def group1(self) -> tuple[int, ...]:
        return tuple(k for k in range(1, self.K + 1) if not (self.mask >> (k - 1)) & 1)

    @property
    def group2(self) -> tuple[int, ...]:
        return tuple(k for k in range(1, self.K + 1) if (self.mask >> (k - 1)) & 1)

    @property
    def label(self) -> str:
        return scheme_label(self)

    def membership(self, levels: np.ndarray) -> np.ndarray:
        """Group number (1 or 2) for each 1-based level index."""
        levels = np.asarray(levels)
        if levels.size and levels.max() > self.K:
            raise ContractViolation(f"scheme covers {self.K} levels but data has level {levels.max()}")
        return 1 + ((self.mask >> (levels - 1)) & 1)

    def __str__(self) -> str:
        return self.label


def scheme_label(s: GroupingScheme) -> str:
    """``"1,4,5:2,3,6"`` style label, group holding level 1 first."""
    return ",".join(map(str, s.group1)) + ":" + ",".join(map(str, s.group2))


def enumerate_schemes(K: int, min_group_size: int = 1) -> list[GroupingScheme]:
    """All canonical two-group splits with both groups of at least ``min_group_size`` levels.

    Ordered by ascending group-2 mask. Returns an empty list when no split
    satisfies the size constraint.
    """
    if K < 2:
        raise ContractViolation("need at least 2 levels to form a grouping scheme")
    if min_group_size < 1:
        raise ContractViolation("min_group_size must be positive")
    out = []
    for mask in range(2, 1 << K, 2):
        n2 = mask.bit_count()
        if n2 >= min_group_size and K - n2 >= min_group_size:
            out.append(GroupingScheme(K, mask))
    return out


def scheme_count(K: int, min_group_size: int) -> int:
    """Closed-form count; matches ``len(enumerate_schemes(K, m))`` for m in {1, 2}."""
    if min_group_size == 1:
        return 2 ** (K - 1) - 1
    if min_group_size == 2:
        return max(2 ** (K - 1) - K - 1, 0)
    raise ContractViolation("closed form only available for min_group_size 1 or 2")


def partition_dataset(data, s: GroupingScheme) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Observation indices of each group for a Dataset or TwoWayLayout."""
    if s.K != data.K:
        raise ContractViolation(f"scheme for K={s.K} applied to data with K={data.K}")
    g = s.membership(data.slgf_level)
    idx1 = np.flatnonzero(g == 1)
    idx2 = np.flatnonzero(g == 2)
    return idx1, idx2, idx1.size, idx2.size
