"""Kernel functions, Bernoulli series and truncation-parameter selection.

The interpolation kernel is split as

    cot(t/2) = 2/t + tail(t),                |t| <= pi
    cot((t +- pi)/2) = -tan(t/2),            |t| <= pi/2

where both regular pieces are odd power series whose coefficients are the
ratios ``r[m] = |B_2m| / (2m)!``.  This module owns those ratios, the
truncated series, the a-priori error bounds and the rules that turn a
prescribed accuracy into truncation numbers ``(q, p)`` and a tree depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import zeta

from .exceptions import DomainError, InvalidArgumentError, SingularKernelError

TWO_PI = 2.0 * math.pi

#: Kernel singularity threshold on the wrapped argument.
TAU_SING = 1e-14

#: Largest Bernoulli table that may be requested.
Q_MAX = 64

#: Largest regular-series truncation accepted by the planner.  Beyond this the
#: prescribed error is below double precision anyway.
Q_PLAN_MAX = 20

#: Slack allowed on the tan-series domain boundary.
TAN_DOMAIN_SLACK = 1e-12

LOG2_3 = math.log2(3.0)


def wrap_angle(t):
    """Reduce ``t`` to the half-open interval ``(-pi, pi]``.

    Values already inside are returned unchanged (no rounding).
    """
    t = np.asarray(t, dtype=float)
    w = t - TWO_PI * np.round(t / TWO_PI)
    w = np.where(w <= -math.pi, w + TWO_PI, np.where(w > math.pi, w - TWO_PI, w))
    return w if w.ndim else float(w)


def periodic_diff(y, x):
    """Wrapped difference ``y - x`` for points ``y, x`` in ``[0, 2 pi)``.

    When a shift is needed it is applied to the operand at least ``pi`` away
    from zero, where subtracting ``2 pi`` is exact, so the only rounding is
    the final subtraction even for nearly coincident points across 0.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    d = y - x
    d = np.where(d > math.pi, (y - TWO_PI) - x, d)
    d = np.where(d <= -math.pi, y - (x - TWO_PI), d)
    return d if d.ndim else float(d)


# ---------------------------------------------------------------------------
# Bernoulli ratios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BernoulliRatioTable:
    """Ratios ``r[m] = |B_2m| / (2m)!`` for ``m = 1..q_max``.

    Indexing is one-based, ``table[m]``, to keep the series formulas
    readable.  ``table.ratios`` is the underlying zero-based array.
    """

    ratios: np.ndarray

    @property
    def q_max(self) -> int:
        return len(self.ratios)

    def __len__(self) -> int:
        return len(self.ratios)

    def __getitem__(self, m: int) -> float:
        if not 1 <= m <= len(self.ratios):
            raise IndexError(f"ratio index {m} outside 1..{len(self.ratios)}")
        return float(self.ratios[m - 1])


def build_bernoulli_ratios(q_max: int) -> BernoulliRatioTable:
    """Tabulate ``|B_2m| / (2m)!`` through ``2 zeta(2m) / (2 pi)^(2m)``.

    The zeta form never materialises ``B_2m`` or a factorial, so every stored
    value is at most 1/12 and the table is accurate to a few ulp for every
    admissible ``q_max``.
    """
    if isinstance(q_max, bool) or int(q_max) != q_max or not 1 <= q_max <= Q_MAX:
        raise InvalidArgumentError(f"q_max must be an integer in [1, {Q_MAX}], got {q_max!r}")
    m = np.arange(1, int(q_max) + 1, dtype=float)
    ratios = 2.0 * zeta(2.0 * m) / TWO_PI ** (2.0 * m)
    ratios.setflags(write=False)
    return BernoulliRatioTable(ratios)


def bernoulli_ratio_bound(m):
    """Upper bound ``2 / ((2 pi)^(2m) (1 - 2^(1-2m)))`` on ``r[m]``."""
    m = np.asarray(m, dtype=float)
    return 2.0 / (TWO_PI ** (2.0 * m) * (1.0 - 2.0 ** (1.0 - 2.0 * m)))


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def kernel_G(t):
    """Amplitude kernel ``G(t) = 1 / (exp(i t) - 1)``.

    Evaluated in the equivalent form ``-(1 + i cot(t/2)) / 2``, which keeps
    full relative accuracy near the pole where ``exp(i t) - 1`` cancels.
    Raises :class:`SingularKernelError` when ``|wrap(t)| <= TAU_SING``.
    """
    t_arr = np.asarray(t, dtype=float)
    w = wrap_angle(t_arr)
    if np.any(np.abs(w) <= TAU_SING):
        raise SingularKernelError("kernel G evaluated at its pole t = 0 (mod 2 pi)")
    half = 0.5 * np.asarray(w)
    out = -0.5 - 0.5j * (np.cos(half) / np.sin(half))
    return out if t_arr.ndim else complex(out)


def grid_offset(y, N: int):
    """Nearest uniform-grid index ``k`` and wrapped offset ``y - x_k``.

    ``x_k`` is the double ``2 pi k / N`` exactly as the grid is built, so
    phases derived from the offset agree with kernels evaluated on the grid.
    """
    y = np.asarray(y, dtype=float)
    k = np.mod(np.round(y * (N / TWO_PI)).astype(np.int64), N)
    return k, periodic_diff(y, TWO_PI * k / N)


def modulation_F(y, N: int):
    """Oscillating factor ``F(y) = (exp(i N y) - 1) / N``.

    Since ``exp(i N x_k) = 1`` the phase is taken from the offset ``delta``
    to the nearest grid node, ``F = 2i sin(N delta/2) exp(i N delta/2) / N``,
    which avoids the ``N``-fold amplified rounding of ``N y``.
    """
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    y_arr = np.mod(np.asarray(y, dtype=float), TWO_PI)
    _, delta = grid_offset(y_arr, N)
    theta = N * np.asarray(delta)
    out = 2j * np.sin(0.5 * theta) * np.exp(0.5j * theta) / N
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# Truncated regular series
# ---------------------------------------------------------------------------


def _check_q(q: int, table: BernoulliRatioTable) -> None:
    if q < 1 or q > len(table):
        raise InvalidArgumentError(f"q={q} outside the table range 1..{len(table)}")


def _odd_series(t, coeffs):
    # sum_m coeffs[m-1] * t^(2m-1), Horner in t^2
    t2 = t * t
    acc = np.zeros_like(t)
    for c in coeffs[::-1]:
        acc = acc * t2 + c
    return acc * t


def cot_series_tail(t, q: int, table: BernoulliRatioTable):
    """Regular part of ``cot(t/2)``: ``-2 sum_{m<=q} r[m] t^(2m-1)``.

    Approximates ``cot(t/2) - 2/t`` on ``|t| <= pi``; the dropped terms sum
    to at most ``2 * eps_q_bound(q)`` there.
    """
    _check_q(q, table)
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(t_arr) > math.pi):
        raise DomainError("cot series requires |t| <= pi")
    out = -2.0 * _odd_series(t_arr, table.ratios[:q])
    return out if t_arr.ndim else float(out)


def tan_series(t, q: int, table: BernoulliRatioTable):
    """Truncated series ``-2 sum_{m<=q} (4^m - 1) r[m] t^(2m-1)`` for ``-tan(t/2)``."""
    _check_q(q, table)
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(t_arr) > 0.5 * math.pi + TAN_DOMAIN_SLACK):
        raise DomainError("tan series requires |t| <= pi/2")
    m = np.arange(1, q + 1, dtype=float)
    coeffs = (4.0**m - 1.0) * table.ratios[:q]
    out = -2.0 * _odd_series(t_arr, coeffs)
    return out if t_arr.ndim else float(out)


# ---------------------------------------------------------------------------
# Error bounds and parameter selection
# ---------------------------------------------------------------------------


def eps_q_bound(q: int) -> float:
    """Bound ``2^(1-2q) / (3 pi (1 - 2^(-2q-1)))`` on the dropped Bernoulli terms."""
    if q < 1:
        raise InvalidArgumentError(f"q must be >= 1, got {q}")
    return 2.0 ** (1 - 2 * q) / (3.0 * math.pi * (1.0 - 2.0 ** (-2 * q - 1)))


def regular_error_bound(q: int) -> float:
    """Per-target error of the regular part for unit-bounded weights, ``5 eps_q / 2``."""
    return 2.5 * eps_q_bound(q)


def mlfmm_error_bound(p: int, l_max: int) -> float:
    """Error estimate ``(5/pi) 2^l_max 3^-p`` of the singular-part MLFMM."""
    return 5.0 / math.pi * 2.0**l_max * 3.0 ** (-p)


def total_error_bound(q: int, p: int, l_max: int) -> float:
    """Combined truncation error ``5/(3 pi) (4^-q + 2^l_max 3^(1-p))``."""
    if min(q, p, l_max) < 1:
        raise InvalidArgumentError("q, p and l_max must all be >= 1")
    return 5.0 / (3.0 * math.pi) * (4.0 ** (-q) + 2.0**l_max * 3.0 ** (1 - p))


def select_truncations(eps: float, l_max: int) -> tuple[int, int]:
    """Smallest ``(q, p)`` meeting the balanced error bound for ``eps``.

    The regular and singular contributions are given equal shares, so

        q >= log2(3 pi / (10 eps)) / 2
        p >= log3(3 pi / (10 eps)) + l_max / log2(3) + 1

    and both are rounded up.
    """
    if not 0.0 < eps < 1.0:
        raise InvalidArgumentError(f"eps must lie in (0, 1), got {eps!r}")
    if l_max < 2:
        raise InvalidArgumentError(f"l_max must be >= 2, got {l_max}")
    ratio = 3.0 * math.pi / (10.0 * eps)
    q = math.ceil(0.5 * math.log2(ratio))
    p = math.ceil(math.log(ratio, 3.0) + l_max / LOG2_3 + 1.0)
    return max(q, 1), max(p, 1)


def default_translation_cost(p: int) -> float:
    """Dense p x p translation, ``2 p^2`` operations."""
    return 2.0 * p * p


@dataclass(frozen=True)
class CostModel:
    """Cost ``P(p)`` of a single translation for truncation number ``p``."""

    translation_cost: Callable[[int], float] = default_translation_cost

    def __call__(self, p: int) -> float:
        return float(self.translation_cost(p))


#: Levels removed from log2(N) by the empirical policy.
EMPIRICAL_LEVEL_OFFSET = 5

LEVEL_POLICIES = ("optimal", "empirical")


def max_level(N: int, M: int) -> int:
    return max(2, int(math.floor(math.log2(min(N, M)))))


def select_level(N: int, M: int, p: int, cost: CostModel | None = None,
                 policy: str = "optimal") -> int:
    """Tree depth minimising the MLFMM cost model.

    ``policy="optimal"`` rounds ``log2(N M / (2 P(p))) / 2``;
    ``policy="empirical"`` uses ``log2(N) - 5``.  Either result is clamped to
    ``[2, floor(log2(min(N, M)))]``.
    """
    if policy not in LEVEL_POLICIES:
        raise InvalidArgumentError(f"unknown level policy {policy!r}")
    if p < 1:
        raise InvalidArgumentError(f"p must be >= 1, got {p}")
    cost = cost or CostModel()
    if policy == "optimal":
        level = round(0.5 * math.log2(N * M / (2.0 * cost(p))))
    else:
        level = round(math.log2(N)) - EMPIRICAL_LEVEL_OFFSET
    return int(min(max(level, 2), max_level(N, M)))


@dataclass(frozen=True)
class TruncationParams:
    eps: float
    q: int
    p: int
    l_max: int
    bound: float = field(init=False)

    def __post_init__(self):
        if self.q < 1 or self.p < 1 or self.l_max < 2:
            raise InvalidArgumentError(f"invalid truncation parameters {self}")
        object.__setattr__(self, "bound", total_error_bound(self.q, self.p, self.l_max))


def choose_parameters(eps: float, N: int, M: int, l_max: int | None = None,
                      policy: str = "optimal", cost: CostModel | None = None) -> TruncationParams:
    """Resolve ``(q, p, l_max)`` for a problem of size ``N x M``.

    With ``l_max`` given it is only clamped.  Otherwise the level and ``p``
    depend on each other; a short fixed-point iteration settles them.
    """
    if l_max is not None:
        if l_max < 2:
            raise InvalidArgumentError(f"l_max must be >= 2, got {l_max}")
        level = int(l_max)
    else:
        level = select_level(N, M, select_truncations(eps, 2)[1], cost, policy)
        for _ in range(8):
            _, p = select_truncations(eps, level)
            new = select_level(N, M, p, cost, policy)
            if new == level:
                break
            level = new
    q, p = select_truncations(eps, level)
    if q > Q_PLAN_MAX:
        raise InvalidArgumentError(
            f"eps={eps:g} needs q={q} > {Q_PLAN_MAX}; this is below double precision")
    return TruncationParams(eps=float(eps), q=q, p=p, l_max=level)
