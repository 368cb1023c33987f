"""Fast Fourier interpolation between a uniform grid and scattered points.

Forward problem: samples ``f_k`` on ``x_k = 2 pi k / N`` determine the
band-limited function, whose values ``g_j`` at arbitrary ``y_j`` are

    g_j = F(y_j) sum_k G(y_j - x_k) f_k
        = F(y_j) * -(sum_k f_k + i h_j) / 2,   h_j = sum_k f_k cot((y_j - x_k)/2)

The cotangent sum ``h`` is the expensive part.  For a target in quadrant
``P_n`` it is split into the singular kernel ``2/t`` over the three nearby
quadrants (evaluated by :mod:`ffia.mlfmm`) and a smooth remainder: the
Bernoulli tail over the same quadrants plus the tan series for the opposite
one.  The remainder is re-expanded about the quadrant center into one
polynomial of degree ``2q - 1`` per quadrant, so every target costs ``O(q)``.

The inverse problem uses the same machinery with sources and targets
exchanged, wrapped by the coefficients ``C_k`` and ``D_j``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateConfigurationError, InvalidArgumentError
from .mlfmm import mlfmm_apply
from .partition import (CircleTree, Level2Assignment, QUADRANT_CENTERS, build_tree,
                        level2_assignment, quadrant_of)
from .special import (TAU_SING, TWO_PI, BernoulliRatioTable, TruncationParams,
                      build_bernoulli_ratios, choose_parameters, grid_offset, kernel_G, modulation_F,
                      periodic_diff, wrap_angle)

#: Minimum separation between distinct points for the inverse coefficients.
TAU_SEP = 1e-10

_BLOCK = 1 << 21


def uniform_grid(N: int) -> np.ndarray:
    """``x_k = 2 pi k / N``."""
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    return TWO_PI * np.arange(N) / N


def reduce_points(points) -> np.ndarray:
    """Map arbitrary real positions into ``[0, 2 pi)``."""
    pts = np.mod(np.asarray(points, dtype=float).ravel(), TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    pts[pts >= TWO_PI] = 0.0
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("positions must be finite")
    return pts


def config_hash(*arrays) -> str:
    """Digest identifying a point configuration."""
    h = hashlib.blake2b(digest_size=8)
    for a in arrays:
        a = np.ascontiguousarray(a, dtype=float)
        h.update(len(a).to_bytes(8, "little"))
        h.update(a.tobytes())
    return h.hexdigest()


def _nearest(sorted_pts, queries):
    """Index into ``sorted_pts`` and wrapped distance of each query's nearest point."""
    n = len(sorted_pts)
    pos = np.searchsorted(sorted_pts, queries)
    lo = (pos - 1) % n
    hi = pos % n
    d_lo = np.abs(periodic_diff(queries, sorted_pts[lo]))
    d_hi = np.abs(periodic_diff(queries, sorted_pts[hi]))
    take_hi = d_hi < d_lo
    return np.where(take_hi, hi, lo), np.where(take_hi, d_hi, d_lo)


@dataclass
class FfiaPlan:
    """Everything about a (sources, targets, eps) configuration that does not
    depend on the data: truncation numbers, tree, quadrant split, Bernoulli
    table and the list of targets sitting on a source.

    ``kind`` is ``"forward"`` (sources are the uniform grid) or
    ``"inverse"`` (targets are the uniform grid); ``"generic"`` plans only
    support :func:`cot_sum_apply`.
    """

    params: TruncationParams
    tree: CircleTree
    level2: Level2Assignment
    bernoulli: BernoulliRatioTable
    sources: np.ndarray
    targets: np.ndarray
    active: np.ndarray  # target indices handled by the fast path
    coincidences: np.ndarray  # (n, 2) int array of (target, source) pairs
    kind: str = "generic"
    N: int = 0
    config: str = field(default="")

    @property
    def q(self):
        return self.params.q

    @property
    def p(self):
        return self.params.p

    @property
    def l_max(self):
        return self.params.l_max


def build_plan(sources, targets, eps: float, l_max: int | None = None,
               policy: str = "optimal", kind: str = "generic", N: int = 0) -> FfiaPlan:
    """Set up the data structure for repeated cotangent-sum evaluation."""
    x = reduce_points(sources)
    y = reduce_points(targets)
    if len(x) == 0:
        raise InvalidArgumentError("at least one source is required")
    n_min = max(min(len(x), max(len(y), 1)), 4)
    params = choose_parameters(eps, max(len(x), 4), n_min, l_max=l_max, policy=policy)

    order = np.argsort(x, kind="stable")
    nearest, dist = _nearest(x[order], y)
    hit = dist < TAU_SING
    coincidences = np.stack([np.flatnonzero(hit), order[nearest[hit]]], axis=1).astype(np.int64)
    active = np.flatnonzero(~hit)

    tree = build_tree(x, y[active], params.l_max)
    return FfiaPlan(
        params=params, tree=tree, level2=level2_assignment(tree),
        bernoulli=build_bernoulli_ratios(params.q), sources=x, targets=y,
        active=active, coincidences=coincidences.reshape(-1, 2), kind=kind, N=N,
        config=config_hash(x, y))


def plan_forward(y, N: int, eps: float = 1e-6, l_max: int | None = None,
                 policy: str = "optimal") -> FfiaPlan:
    """Plan for uniform samples of size ``N`` -> values at ``y``."""
    return build_plan(uniform_grid(N), y, eps, l_max, policy, kind="forward", N=N)


def plan_inverse(y, N: int, eps: float = 1e-6, l_max: int | None = None,
                 policy: str = "optimal") -> FfiaPlan:
    """Plan for values at ``y`` -> uniform samples of size ``N``.  Needs ``len(y) == N``."""
    y = reduce_points(y)
    if len(y) != N:
        raise InvalidArgumentError(f"the inverse transform needs M == N, got M={len(y)}, N={N}")
    return build_plan(y, uniform_grid(N), eps, l_max, policy, kind="inverse", N=N)


# ---------------------------------------------------------------------------
# Regular part: quadrant moments and polynomial
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegularPart:
    """Per-quadrant moments ``alpha1``, ``alpha2`` and polynomial coefficients ``d``.

    All arrays have shape ``(4, 2q)``.  ``alpha[s][n, l]`` already includes
    the ``1/l!`` factor.
    """

    alpha1: np.ndarray
    alpha2: np.ndarray
    d: np.ndarray
    centers: np.ndarray

    @property
    def q(self):
        return self.d.shape[1] // 2


def _scaled_powers(v, n_terms):
    """Rows ``v^l / l!`` for ``l < n_terms``."""
    out = np.empty((n_terms, len(v)))
    out[0] = 1.0
    for l in range(1, n_terms):
        np.multiply(out[l - 1], v / l, out=out[l])
    return out


def bernoulli_over_m(table: BernoulliRatioTable, q: int) -> np.ndarray:
    """``|B_2m| / m`` for ``m = 1..q`` as ``r[m] * (2m)!/m``.

    The factorial ratio is carried along incrementally,
    ``(2m+2)!/(m+1) = (2m)!/m * (2m+1)(2m+2) m/(m+1)``.
    """
    out = np.empty(q)
    fact_ratio = 2.0  # (2m)!/m at m = 1
    for m in range(1, q + 1):
        out[m - 1] = table[m] * fact_ratio
        fact_ratio *= (2 * m + 1) * (2 * m + 2) * m / (m + 1)
    return out


def assemble_d(alpha1, alpha2, table: BernoulliRatioTable, q: int) -> np.ndarray:
    """``d_l = sum_{m > l/2}^{q} |B_2m|/m [alpha1_{2m-l-1} + (4^m - 1) alpha2_{2m-l-1}]``."""
    bm = bernoulli_over_m(table, q)
    d = np.zeros(alpha1.shape[:-1] + (2 * q,), dtype=complex)
    for m in range(1, q + 1):
        c1, c2 = bm[m - 1], bm[m - 1] * (4.0**m - 1.0)
        for l in range(2 * m):
            j = 2 * m - l - 1
            d[..., l] += c1 * alpha1[..., j] + c2 * alpha2[..., j]
    return d


def accumulate_moments(plan: FfiaPlan, weights) -> RegularPart:
    """Quadrant moments of the weights and the resulting polynomial coefficients.

    Sources in the near set of quadrant ``n`` enter through their copy
    ``x~`` next to the quadrant center, those in the opposite quadrant through
    the antipode ``x^ = x +- pi`` which lies inside ``P_n``.
    """
    w = np.asarray(weights, dtype=complex).ravel()
    if len(w) != len(plan.sources):
        raise InvalidArgumentError(f"{len(w)} weights for {len(plan.sources)} sources")
    q = plan.q
    n_terms = 2 * q
    x = plan.sources
    centers = plan.level2.centers
    alpha1 = np.zeros((4, n_terms), dtype=complex)
    alpha2 = np.zeros((4, n_terms), dtype=complex)
    for n in range(4):
        i1, i2 = plan.level2.omega1[n], plan.level2.omega2[n]
        if len(i1):
            v1 = periodic_diff(centers[n], x[i1])  # x_c - x~
            alpha1[n] = _scaled_powers(v1, n_terms) @ w[i1]
        if len(i2):
            v2 = wrap_angle(periodic_diff(centers[n], x[i2]) - math.pi)  # x_c - x^
            alpha2[n] = _scaled_powers(v2, n_terms) @ w[i2]
    d = assemble_d(alpha1, alpha2, plan.bernoulli, q)
    return RegularPart(alpha1, alpha2, d, centers.copy())


def _taylor_coeffs(part: RegularPart) -> np.ndarray:
    l = np.arange(part.d.shape[1])
    fact = np.array([math.factorial(int(k)) for k in l], dtype=float)
    return -part.d / fact


def eval_regular(part: RegularPart, y, quadrant):
    """``-sum_l d_l / l! (y - x_c)^l`` for ``y`` in the given quadrant(s)."""
    y_arr = np.asarray(y, dtype=float)
    quad = np.broadcast_to(np.asarray(quadrant), y_arr.shape)
    coeffs = _taylor_coeffs(part)
    out = np.zeros(y_arr.shape, dtype=complex)
    for n in range(4):
        mask = quad == n
        if not np.any(mask):
            continue
        u = y_arr[mask] - part.centers[n]
        acc = np.zeros(u.shape, dtype=complex)
        for c in coeffs[n, ::-1]:
            acc = acc * u + c
        out[mask] = acc
    return out if y_arr.ndim else complex(out)


# ---------------------------------------------------------------------------
# Cotangent sum and the two transforms
# ---------------------------------------------------------------------------


def cot_sum_apply(plan: FfiaPlan, weights) -> np.ndarray:
    """``h_j = sum_k w_k cot((y_j - x_k)/2)`` at every target.

    Targets listed in ``plan.coincidences`` are left as NaN.
    """
    w = np.asarray(weights, dtype=complex).ravel()
    part = accumulate_moments(plan, w)
    h = np.full(len(plan.targets), np.nan + 0j)
    y = plan.targets[plan.active]
    singular = mlfmm_apply(plan.tree, w, plan.p)
    h[plan.active] = 2.0 * singular + eval_regular(part, y, quadrant_of(y))
    return h


def forward_apply(plan: FfiaPlan, f) -> np.ndarray:
    """Values at the plan's targets of the band-limited function sampled by ``f``."""
    if plan.kind != "forward":
        raise InvalidArgumentError(f"forward_apply needs a forward plan, got {plan.kind!r}")
    f = np.asarray(f, dtype=complex).ravel()
    if len(f) != plan.N:
        raise InvalidArgumentError(f"expected {plan.N} samples, got {len(f)}")
    h = cot_sum_apply(plan, f)
    g = modulation_F(plan.targets, plan.N) * (-0.5 * (f.sum() + 1j * h))
    if len(plan.coincidences):
        g[plan.coincidences[:, 0]] = f[plan.coincidences[:, 1]]
    return g


# ---------------------------------------------------------------------------
# Inverse coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InverseCoeffs:
    """``C_k`` and ``D_j`` as log-magnitude and phase.

    ``C_k = (-1)^k prod_j sin((x_k - y_j)/2)`` and
    ``D_j = 2i exp(-i N y_j / 2) / prod_{k != j} sin((y_j - y_k)/2)``; their
    magnitudes behave like ``2^-N`` and ``2^N``, so they are only ever
    exponentiated after combining.
    """

    log_c: np.ndarray
    phase_c: np.ndarray
    log_d: np.ndarray
    phase_d: np.ndarray
    config: str

    def scaled(self):
        """``(C * s, D / s)`` with ``s`` chosen so neither side overflows."""
        shift = float(np.max(self.log_d)) if len(self.log_d) else 0.0
        c = np.exp(self.log_c + shift + 1j * self.phase_c)
        d = np.exp(self.log_d - shift + 1j * self.phase_d)
        return c, d

    @property
    def C(self):
        return np.exp(self.log_c + 1j * self.phase_c)

    @property
    def D(self):
        return np.exp(self.log_d + 1j * self.phase_d)


def check_separation(x, y, tau: float = TAU_SEP) -> None:
    """Raise if two ``y`` points, or a ``y`` and an ``x``, are within ``tau``."""
    order = np.argsort(y, kind="stable")
    ys = y[order]
    if len(ys) > 1:
        gaps = np.abs(periodic_diff(np.roll(ys, -1), ys))
        i = int(np.argmin(gaps))
        if gaps[i] < tau:
            a, b = int(order[i]), int(order[(i + 1) % len(ys)])
            raise DegenerateConfigurationError(
                f"targets y[{a}] and y[{b}] are {gaps[i]:.3g} apart (< {tau:g})", (a, b))
    xo = np.argsort(x, kind="stable")
    near, dist = _nearest(x[xo], y)
    j = int(np.argmin(dist))
    if dist[j] < tau:
        k = int(xo[near[j]])
        raise DegenerateConfigurationError(
            f"target y[{j}] is {dist[j]:.3g} from grid point x[{k}] (< {tau:g})", (j, k))


def _log_sin_products(a, b, skip_diagonal):
    """Row sums of ``log|sin((a_i - b_j)/2)|`` and counts of negative factors."""
    logs = np.zeros(len(a))
    negs = np.zeros(len(a), dtype=np.int64)
    step = max(1, _BLOCK // max(len(b), 1))
    for s in range(0, len(a), step):
        aa = a[s:s + step, None]
        with np.errstate(divide="ignore"):
            ls = np.log(np.abs(np.sin(0.5 * periodic_diff(aa, b[None, :]))))
        neg = aa < b[None, :]
        if skip_diagonal:
            rows = np.arange(len(aa))
            ls[rows, s + rows] = 0.0
            neg[rows, s + rows] = False
        logs[s:s + step] = ls.sum(axis=1)
        negs[s:s + step] = neg.sum(axis=1)
    return logs, negs


def precompute_inverse_coeffs(x, y) -> InverseCoeffs:
    """``C_k`` and ``D_j`` by direct products in the log domain, ``O(N^2)``.

    The sign of ``sin((a - b)/2)`` for ``a, b`` in ``[0, 2 pi)`` is the sign of
    ``a - b``, so signs come from exact comparisons and magnitudes from the
    wrapped difference.
    """
    x = reduce_points(x)
    y = reduce_points(y)
    N = len(x)
    if len(y) != N:
        raise InvalidArgumentError(f"the inverse coefficients need M == N, got {len(y)} and {N}")
    check_separation(x, y)
    log_c, neg_c = _log_sin_products(x, y, skip_diagonal=False)
    phase_c = math.pi * ((neg_c + np.arange(N)) % 2)
    log_d, neg_d = _log_sin_products(y, y, skip_diagonal=True)
    log_d = math.log(2.0) - log_d
    # exp(-i N y / 2) = (-1)^k exp(-i N delta / 2) with y = x_k + delta
    k, delta = grid_offset(y, N)
    phase_d = np.mod(0.5 * math.pi - 0.5 * N * delta - math.pi * ((neg_d + k) % 2), TWO_PI)
    return InverseCoeffs(log_c, phase_c, log_d, phase_d, config_hash(y, x))


def inverse_apply(plan: FfiaPlan, coeffs: InverseCoeffs, g) -> np.ndarray:
    """Uniform samples ``f_k = sum_j C_k G(x_k - y_j) D_j g_j``."""
    if plan.kind != "inverse":
        raise InvalidArgumentError(f"inverse_apply needs an inverse plan, got {plan.kind!r}")
    if coeffs.config != plan.config:
        raise InvalidArgumentError("inverse coefficients were computed for another configuration")
    g = np.asarray(g, dtype=complex).ravel()
    if len(g) != len(plan.sources):
        raise InvalidArgumentError(f"expected {len(plan.sources)} values, got {len(g)}")
    c, d = coeffs.scaled()
    w = d * g
    h = cot_sum_apply(plan, w)
    return c * (-0.5 * (w.sum() + 1j * h))


# ---------------------------------------------------------------------------
# Direct O(N M) oracles
# ---------------------------------------------------------------------------


def forward_matrix(x, y) -> np.ndarray:
    """Dense ``K_jk = F(y_j) G(y_j - x_k)``; coincident rows become unit rows."""
    x = reduce_points(x)
    y = reduce_points(y)
    t = periodic_diff(y[:, None], x[None, :])
    hit = np.abs(t) < TAU_SING
    K = modulation_F(y, len(x))[:, None] * kernel_G(np.where(hit, 1.0, t))
    rows = np.flatnonzero(hit.any(axis=1))
    K[rows] = hit[rows].astype(float)
    return K


def direct_forward_oracle(f, x, y) -> np.ndarray:
    """``g = K f`` by explicit summation, blocked to bound memory."""
    f = np.asarray(f, dtype=complex).ravel()
    x = reduce_points(x)
    y = reduce_points(y)
    if len(f) != len(x):
        raise InvalidArgumentError(f"{len(f)} samples for {len(x)} grid points")
    g = np.empty(len(y), dtype=complex)
    step = max(1, _BLOCK // max(len(x), 1))
    for s in range(0, len(y), step):
        g[s:s + step] = forward_matrix(x, y[s:s + step]) @ f
    return g


def inverse_matrix(x, y, coeffs: InverseCoeffs) -> np.ndarray:
    """Dense ``L_kj = C_k G(x_k - y_j) D_j``."""
    x = reduce_points(x)
    y = reduce_points(y)
    c, d = coeffs.scaled()
    return c[:, None] * kernel_G(periodic_diff(x[:, None], y[None, :])) * d[None, :]


def direct_inverse_oracle(g, x, y, coeffs: InverseCoeffs) -> np.ndarray:
    g = np.asarray(g, dtype=complex).ravel()
    x = reduce_points(x)
    y = reduce_points(y)
    if coeffs.config != config_hash(y, x):
        raise InvalidArgumentError("inverse coefficients were computed for another configuration")
    c, d = coeffs.scaled()
    w = d * g
    f = np.empty(len(x), dtype=complex)
    step = max(1, _BLOCK // max(len(y), 1))
    for s in range(0, len(x), step):
        G = kernel_G(periodic_diff(x[s:s + step, None], y[None, :]))
        f[s:s + step] = c[s:s + step] * (G @ w)
    return f
