"""Multilevel FMM for the periodic Cauchy sum ``S(y) = sum_k w_k / (y - x~_k)``.

``x~_k`` is the copy of ``x_k`` within ``pi`` of ``y``.  Sources in the
quadrant opposite to the target's level-2 quadrant are left out; the caller
covers them with the tan series.  The tree never needs to know this: the
periodic neighbour and interaction lists starting at level 3 reach exactly
the three quadrants around a target box, so the exclusion falls out of the
construction.

Expansion conventions (``c`` a box center)::

    multipole   sum_m a_m / (y - c)^(m+1),   a_m = sum_k w_k (x_k - c)^m
    local       sum_l b_l (y - c)^l

Inside :func:`mlfmm_apply` coefficients are stored scaled by the box
half-width ``h`` (``a_m / h^m`` and ``b_l h^l``), which keeps every
translation-matrix entry bounded regardless of the tree depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .exceptions import InvalidArgumentError, SingularKernelError, TranslationError
from .partition import CircleTree, box_centers, box_half_width, interaction_offsets, quadrant_of
from .special import TAU_SING, TWO_PI, periodic_diff, wrap_angle

# Upper bound on the (targets x near sources) block evaluated at once.
_NEAR_BLOCK = 1 << 21


@dataclass(frozen=True)
class MultipoleExpansion:
    center: float
    coeffs: np.ndarray
    radius: float | None = None  # half-width of the box the sources live in

    @property
    def p(self):
        return len(self.coeffs)

    def evaluate(self, y):
        """Sum the far-field series at ``y`` (unwrapped coordinate)."""
        z = np.asarray(y, dtype=float) - self.center
        acc = np.zeros(np.shape(z), dtype=complex)
        for a in self.coeffs[::-1]:
            acc = acc / z + a
        return acc / z


@dataclass(frozen=True)
class LocalExpansion:
    center: float
    coeffs: np.ndarray

    @property
    def p(self):
        return len(self.coeffs)

    def evaluate(self, y):
        u = np.asarray(y, dtype=float) - self.center
        return _horner(self.coeffs, u)


def _horner(coeffs, u):
    acc = np.zeros(np.shape(u), dtype=complex)
    for b in coeffs[::-1]:
        acc = acc * u + b
    return acc


# ---------------------------------------------------------------------------
# Translation matrices.  Each maps coefficient vectors by ``new = T @ old``.
# ---------------------------------------------------------------------------


def m2m_matrix(shift: float, p: int, src_scale: float = 1.0, dst_scale: float = 1.0):
    """Re-centre a multipole from ``old`` to ``new``, ``shift = old - new``."""
    m = np.arange(p)
    C = comb(m[:, None], m[None, :])
    diff = m[:, None] - m[None, :]
    with np.errstate(invalid="ignore"):
        pw = np.where(diff >= 0, float(shift) ** np.maximum(diff, 0), 0.0)
    return C * pw * (src_scale ** m[None, :]) / (dst_scale ** m[:, None])


def m2l_matrix(displacement: float, p: int, src_scale: float = 1.0, dst_scale: float = 1.0):
    """Multipole about ``c_s`` to local about ``c_t``; ``displacement = c_t - c_s``.

    ``b_l = sum_m a_m (-1)^l C(l+m, m) / d^(l+m+1)``.
    """
    d = float(displacement)
    idx = np.arange(p)
    C = comb(idx[:, None] + idx[None, :], idx[None, :])
    sign = (-1.0) ** idx[:, None]
    return sign * C * (src_scale / d) ** idx[None, :] * (dst_scale / d) ** idx[:, None] / d


def l2l_matrix(shift: float, p: int, src_scale: float = 1.0, dst_scale: float = 1.0):
    """Taylor shift, ``shift = child - parent``."""
    m = np.arange(p)
    C = comb(m[None, :], m[:, None])  # C(m, l) at [l, m]
    diff = m[None, :] - m[:, None]
    pw = np.where(diff >= 0, float(shift) ** np.maximum(diff, 0), 0.0)
    return C * pw * (dst_scale ** m[:, None]) / (src_scale ** m[None, :])


# ---------------------------------------------------------------------------
# Single-expansion operators
# ---------------------------------------------------------------------------


def p2m(positions, weights, center: float, p: int, radius: float | None = None) -> MultipoleExpansion:
    """Moments ``a_m = sum_k w_k (x_k - center)^m`` for ``m < p``.

    Positions are taken as given (already shifted next to ``center``).
    """
    x = np.asarray(positions, dtype=float) - center
    w = np.asarray(weights, dtype=complex)
    if radius is not None and np.any(np.abs(x) > radius * (1 + 1e-12)):
        raise InvalidArgumentError("source lies outside the expansion box")
    pw = np.power.outer(x, np.arange(p)) if len(x) else np.zeros((0, p))
    return MultipoleExpansion(float(center), w @ pw, radius)


def m2m(child: MultipoleExpansion, new_center: float, radius: float | None = None) -> MultipoleExpansion:
    T = m2m_matrix(child.center - new_center, child.p)
    return MultipoleExpansion(float(new_center), T @ child.coeffs, radius)


def m2l(source: MultipoleExpansion, target_center: float, displacement: float | None = None) -> LocalExpansion:
    """Convert a multipole into a local expansion about ``target_center``.

    ``displacement`` is the periodic center difference ``c_t - c_s``; by
    default it is the wrapped difference.  When the source expansion carries
    a box radius, boxes closer than one box apart are rejected.
    """
    if displacement is None:
        displacement = wrap_angle(target_center - source.center)
    if abs(displacement) < 1e-300:
        raise TranslationError("zero M2L displacement")
    if source.radius is not None and abs(displacement) < 4.0 * source.radius * (1 - 1e-12):
        raise TranslationError(
            f"boxes not well separated: |d|={abs(displacement):g} < 4h={4 * source.radius:g}")
    T = m2l_matrix(displacement, source.p)
    return LocalExpansion(float(target_center), T @ source.coeffs)


def l2l(parent: LocalExpansion, child_center: float) -> LocalExpansion:
    T = l2l_matrix(child_center - parent.center, parent.p)
    return LocalExpansion(float(child_center), T @ parent.coeffs)


# ---------------------------------------------------------------------------
# Full evaluation
# ---------------------------------------------------------------------------


class _Operators:
    """Per-level scaled translation matrices, shared by every box of a level."""

    def __init__(self, p):
        self.p = p
        # child scale h, parent scale 2h, |shift| = h: entries independent of h
        self.m2m_left = m2m_matrix(-1.0, p, 1.0, 2.0)   # child center below parent
        self.m2m_right = m2m_matrix(1.0, p, 1.0, 2.0)
        self.l2l_left = l2l_matrix(-1.0, p, 2.0, 1.0)
        self.l2l_right = l2l_matrix(1.0, p, 2.0, 1.0)
        # box width 2h, source box at offset o: d = -2 o h.  With unit scales
        # the matrix is off by the single factor 1/h, applied per level.
        self.m2l = {o: m2l_matrix(-2.0 * o, p) for o in (-3, -2, 2, 3)}


def _near_field(tree: CircleTree, w_sorted: np.ndarray) -> np.ndarray:
    """Direct 1/t sum over own box and both periodic neighbours at ``l_max``.

    Sources are laid out twice, ``[x - 2 pi, x]``, so each target box's
    neighbourhood is one contiguous slice.  Targets in the last box are
    moved down by ``2 pi`` instead of moving box 0 up; every shift is then
    applied to a value >= pi, where it is exact.
    """
    L = tree.l_max
    n = 1 << L
    src, tgt = tree.sources, tree.targets
    xs = src.sorted_points
    ns = len(xs)
    out = np.zeros(len(tgt), dtype=complex)
    if len(tgt) == 0 or ns == 0:
        return out
    off = src.offsets[L - 2]
    ext_x = np.concatenate([xs - TWO_PI, xs])
    ext_w = np.concatenate([w_sorted, w_sorted])

    boxes = np.arange(n)
    lo = ns + off[np.maximum(boxes - 1, 0)]
    hi = ns + off[np.minimum(boxes + 2, n)]
    lo[0] = off[n - 1]
    lo[n - 1], hi[n - 1] = off[n - 2], ns + off[1]

    ys = tgt.sorted_points.copy()
    last = tgt.box_slice(L, n - 1)
    ys[last] -= TWO_PI
    tb = np.repeat(boxes, tgt.counts(L))
    t_lo, t_hi = lo[tb], hi[tb]

    rows = max(1, _NEAR_BLOCK // max(int(np.max(t_hi - t_lo)), 1))
    for start in range(0, len(ys), rows):
        stop = min(len(ys), start + rows)
        blo, bhi = t_lo[start:stop], t_hi[start:stop]
        K = int(np.max(bhi - blo))
        if K == 0:
            continue
        idx = blo[:, None] + np.arange(K)[None, :]
        valid = idx < bhi[:, None]
        idx = np.where(valid, idx, 0)
        diff = ys[start:stop, None] - ext_x[idx]
        diff[~valid] = np.inf
        if np.any(np.abs(diff) < TAU_SING):
            r = int(np.argwhere(np.abs(diff) < TAU_SING)[0, 0])
            raise SingularKernelError(
                f"target {int(tgt.order[start + r])} coincides with a source")
        out[start:stop] = np.einsum("ij,ij->i", 1.0 / diff, ext_w[idx])
    return out


def _upward(tree, w_sorted, ops):
    """Scaled multipole coefficients per box for levels 3..l_max."""
    L, p = tree.l_max, ops.p
    n = 1 << L
    h = box_half_width(L)
    xs = tree.sources.sorted_points
    counts = tree.sources.counts(L)
    A = {}
    leaf = np.zeros((n, p), dtype=complex)
    if len(xs):
        ids = np.repeat(np.arange(n), counts)
        r = (xs - box_centers(L)[ids]) / h
        pw = np.ones((len(xs), p))
        for m in range(1, p):
            pw[:, m] = pw[:, m - 1] * r
        terms = w_sorted[:, None] * pw
        nonempty = counts > 0
        starts = tree.sources.offsets[L - 2][:-1][nonempty]
        leaf[nonempty] = np.add.reduceat(terms, starts, axis=0)
    A[L] = leaf
    for level in range(L - 1, 2, -1):
        child = A[level + 1]
        A[level] = child[0::2] @ ops.m2m_left.T + child[1::2] @ ops.m2m_right.T
    return A


def _downward(tree, A, ops):
    L = tree.l_max
    B = {}
    for level in range(3, L + 1):
        n = 1 << level
        local = np.zeros_like(A[level])
        for parity in (0, 1):
            boxes = np.arange(parity, n, 2)
            for o in interaction_offsets(parity):
                local[boxes] += A[level][(boxes + o) % n] @ ops.m2l[o].T
        local /= box_half_width(level)
        if level > 3:
            parent = B[level - 1]
            local[0::2] += parent @ ops.l2l_left.T
            local[1::2] += parent @ ops.l2l_right.T
        B[level] = local
    return B


def _evaluate_locals(tree, B):
    L = tree.l_max
    n = 1 << L
    ys = tree.targets.sorted_points
    ids = np.repeat(np.arange(n), tree.targets.counts(L))
    r = (ys - box_centers(L)[ids]) / box_half_width(L)
    coeffs = B[L][ids]
    acc = np.zeros(len(ys), dtype=complex)
    for l in range(coeffs.shape[1] - 1, -1, -1):
        acc = acc * r + coeffs[:, l]
    return acc


def mlfmm_apply(tree: CircleTree, weights, p: int) -> np.ndarray:
    """Evaluate ``sum_k w_k / (y_j - x~_k)`` at every target of ``tree``.

    Sources in the quadrant opposite to the target's are excluded.  The
    result is in the original target order.
    """
    w = np.asarray(weights, dtype=complex).ravel()
    if len(w) != len(tree.sources):
        raise InvalidArgumentError(
            f"{len(w)} weights for {len(tree.sources)} sources")
    if p < 1:
        raise InvalidArgumentError(f"p must be >= 1, got {p}")
    w_sorted = w[tree.sources.order]
    s_sorted = _near_field(tree, w_sorted)
    if tree.l_max >= 3:
        ops = _Operators(p)
        A = _upward(tree, w_sorted, ops)
        B = _downward(tree, A, ops)
        s_sorted = s_sorted + _evaluate_locals(tree, B)
    out = np.empty_like(s_sorted)
    out[tree.targets.order] = s_sorted
    return out


def direct_excluded_sum(sources, targets, weights) -> np.ndarray:
    """Brute-force ``O(N M)`` counterpart of :func:`mlfmm_apply`."""
    x = np.asarray(sources, dtype=float)
    y = np.asarray(targets, dtype=float)
    w = np.asarray(weights, dtype=complex)
    qx = quadrant_of(x)
    out = np.zeros(len(y), dtype=complex)
    step = max(1, _NEAR_BLOCK // max(len(x), 1))
    for s in range(0, len(y), step):
        yy = y[s:s + step]
        d = periodic_diff(yy[:, None], x[None, :])
        keep = qx[None, :] != (quadrant_of(yy)[:, None] + 2) % 4
        if np.any(keep & (np.abs(d) < TAU_SING)):
            raise SingularKernelError("target coincides with a source")
        out[s:s + step] = np.where(keep, 1.0 / np.where(keep, d, 1.0), 0.0) @ w
    return out
