"""Periodic binary-tree partition of the unit circle.

Level ``l`` cuts ``[0, 2 pi)`` into ``2^l`` equal half-open arcs.  Box ``b``
has parent ``b // 2`` and periodic neighbours ``(b +- 1) mod 2^l``.  Only
levels ``2..l_max`` are stored: at levels 0 and 1 every box touches every
other box, so nothing can be translated there.

Points are kept in one position-sorted order per point set.  Because box
ids are monotone in position, every box at every level is then a contiguous
slice of that order, so a box's members are described by two offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError
from .special import TWO_PI, periodic_diff, wrap_angle

QUADRANT_CENTERS = math.pi / 4 + np.arange(4) * (math.pi / 2)


def wrap_displacement(a, b):
    """Periodic difference ``a - b`` reduced to ``(-pi, pi]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    inside = (a >= 0) & (a < TWO_PI) & (b >= 0) & (b < TWO_PI)
    if np.all(inside):
        return periodic_diff(a, b)
    return wrap_angle(a - b)


def box_of(points, level: int) -> np.ndarray:
    """Level-``level`` box index of each point in ``[0, 2 pi)``."""
    n = 1 << level
    idx = np.floor(np.asarray(points, dtype=float) * (n / TWO_PI)).astype(np.int64)
    # x < 2pi can still round up to n
    return np.minimum(idx, n - 1)


def quadrant_of(points) -> np.ndarray:
    """Level-2 quadrant ``P_n`` containing each point."""
    return box_of(points, 2)


def box_centers(level: int) -> np.ndarray:
    n = 1 << level
    return TWO_PI * (np.arange(n) + 0.5) / n


def box_half_width(level: int) -> float:
    return math.pi / (1 << level)


def neighbors(level: int, box: int, l_max: int | None = None) -> tuple[int, int]:
    """Periodic neighbours ``((box-1) mod 2^l, (box+1) mod 2^l)``."""
    _check_box(level, box, l_max, min_level=2)
    n = 1 << level
    return (box - 1) % n, (box + 1) % n


# Interaction lists are translation invariant on the circle: a left child
# (even box) sees offsets -2, +2, +3 and a right child sees -3, -2, +2.
_INTERACTION_OFFSETS = {0: (-2, 2, 3), 1: (-3, -2, 2)}


def interaction_offsets(parity: int) -> tuple[int, ...]:
    return _INTERACTION_OFFSETS[parity]


def interaction_list(level: int, box: int, l_max: int | None = None) -> list[int]:
    """Boxes translated into ``box`` at ``level`` by multipole-to-local.

    These are the children of the parent's neighbourhood that are not
    themselves adjacent to ``box``.  Level 2 has no interaction list: the
    opposite quadrant is handled by the tan series, never by expansions.
    """
    _check_box(level, box, l_max, min_level=2)
    if level <= 2:
        return []
    n = 1 << level
    return sorted((box + o) % n for o in _INTERACTION_OFFSETS[box % 2])


def _check_box(level, box, l_max, min_level):
    if level < min_level or (l_max is not None and level > l_max):
        raise InvalidArgumentError(f"level {level} outside [{min_level}, {l_max}]")
    if not 0 <= box < (1 << level):
        raise InvalidArgumentError(f"box {box} outside [0, {1 << level})")


def _check_points(points, name):
    pts = np.ascontiguousarray(points, dtype=float).ravel()
    bad = ~((pts >= 0.0) & (pts < TWO_PI))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise InvalidArgumentError(
            f"{name}[{i}] = {pts[i]!r} is outside [0, 2pi); reduce mod 2pi first")
    return pts


@dataclass(frozen=True)
class PointSet:
    """Points bucketed at every tree level via a single sorted order."""

    points: np.ndarray
    order: np.ndarray  # sorted position -> original index
    offsets: tuple  # offsets[l - 2][b] .. offsets[l - 2][b + 1] slice box b

    @classmethod
    def build(cls, points, l_max):
        order = np.argsort(points, kind="stable")
        sorted_pts = points[order]
        offsets = []
        for level in range(2, l_max + 1):
            ids = box_of(sorted_pts, level)
            offsets.append(np.searchsorted(ids, np.arange((1 << level) + 1), side="left"))
        return cls(points, order, tuple(offsets))

    def __len__(self):
        return len(self.points)

    @property
    def sorted_points(self):
        return self.points[self.order]

    def box_slice(self, level, box):
        off = self.offsets[level - 2]
        return slice(int(off[box]), int(off[box + 1]))

    def indices(self, level, box):
        return self.order[self.box_slice(level, box)]

    def counts(self, level):
        return np.diff(self.offsets[level - 2])

    def box_ids(self, level):
        """Box index of every point, in original order."""
        return box_of(self.points, level)


class CircleTree:
    """Binary partition of the circle holding one source and one target set.

    Boxes are never pruned; empty boxes simply have empty slices.
    """

    def __init__(self, sources, targets, l_max: int):
        if l_max < 2:
            raise InvalidArgumentError(f"l_max must be >= 2, got {l_max}")
        self.l_max = int(l_max)
        self.sources = PointSet.build(_check_points(sources, "sources"), self.l_max)
        self.targets = PointSet.build(_check_points(targets, "targets"), self.l_max)

    def __repr__(self):
        return (f"CircleTree(l_max={self.l_max}, sources={len(self.sources)}, "
                f"targets={len(self.targets)})")

    @property
    def levels(self):
        return range(2, self.l_max + 1)

    def n_boxes(self, level):
        return 1 << level

    def center(self, level, box):
        return TWO_PI * (box + 0.5) / (1 << level)

    def half_width(self, level):
        return box_half_width(level)

    def source_indices(self, level, box):
        """Source indices in ``box``, ascending by position."""
        return self.sources.indices(level, box)

    def target_indices(self, level, box):
        return self.targets.indices(level, box)

    def parent(self, box):
        return box // 2

    def neighbors(self, level, box):
        return neighbors(level, box, self.l_max)

    def interaction_list(self, level, box):
        return interaction_list(level, box, self.l_max)


def build_tree(sources, targets, l_max: int) -> CircleTree:
    """Bucket sources and targets into a periodic tree of depth ``l_max``."""
    return CircleTree(sources, targets, l_max)


@dataclass(frozen=True)
class Level2Assignment:
    """Quadrant membership and the neighbourhood split at level 2.

    For target quadrant ``n`` the near set ``omega1[n]`` holds the sources of
    quadrants ``n-1, n, n+1`` and the far set ``omega2[n]`` those of the
    opposite quadrant ``n+2``.
    """

    sources: tuple
    targets: tuple
    omega1: tuple
    omega2: tuple
    centers: np.ndarray


def level2_assignment(tree: CircleTree) -> Level2Assignment:
    src = tuple(tree.source_indices(2, n) for n in range(4))
    tgt = tuple(tree.target_indices(2, n) for n in range(4))
    omega1 = tuple(np.sort(np.concatenate([src[(n - 1) % 4], src[n], src[(n + 1) % 4]]))
                   for n in range(4))
    omega2 = tuple(src[(n + 2) % 4] for n in range(4))
    return Level2Assignment(src, tgt, omega1, omega2, QUADRANT_CENTERS.copy())


def near_shift(x, center):
    """Copy ``x~`` of ``x`` lying within ``pi`` of ``center``."""
    return center + wrap_displacement(x, center)


def opposite_shift(x, center):
    """Antipode ``x^ = x +- pi`` lying within ``pi`` of ``center``."""
    return center + wrap_displacement(np.asarray(x, dtype=float) + math.pi, center)
