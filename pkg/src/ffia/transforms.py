"""Uniform DFTs and the non-uniform transforms built on them.

Conventions follow the band-limited model

    f(x) = sum_{n=0}^{N-1} c_n exp(i n x),     c_n = (1/N) sum_k f_k exp(-i n x_k)

so the ``1/N`` sits on the samples -> coefficients direction and frequencies
run over ``0..N-1`` (not ``-N/2..N/2``).
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from functools import lru_cache

import numpy as np

from .core import (FfiaPlan, InverseCoeffs, config_hash, forward_apply, inverse_apply,
                   plan_forward, plan_inverse, precompute_inverse_coeffs, reduce_points,
                   uniform_grid)
from .exceptions import InvalidArgumentError


def _log2(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise InvalidArgumentError(f"length must be a power of two, got {n}")
    return n.bit_length() - 1


@lru_cache(maxsize=32)
def _bit_reversal(n: int) -> np.ndarray:
    bits = _log2(n)
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=64)
def _twiddles(size: int, sign: int) -> np.ndarray:
    tw = np.exp(sign * 2j * math.pi * np.arange(size // 2) / size)
    tw.setflags(write=False)
    return tw


def _fft(a: np.ndarray, sign: int) -> np.ndarray:
    """Unnormalised radix-2 decimation-in-time FFT, ``sum_k a_k exp(sign i 2 pi n k / N)``."""
    n = len(a)
    _log2(n)
    out = np.asarray(a, dtype=complex)[_bit_reversal(n)]
    size = 2
    while size <= n:
        half = size // 2
        blocks = out.reshape(n // size, size)
        even = blocks[:, :half].copy()
        odd = blocks[:, half:] * _twiddles(size, sign)
        blocks[:, :half] = even + odd
        blocks[:, half:] = even - odd
        size *= 2
    return out


def dft_forward(f) -> np.ndarray:
    """Fourier coefficients ``c_n = (1/N) sum_k f_k exp(-i n x_k)``."""
    f = np.asarray(f, dtype=complex).ravel()
    return _fft(f, -1) / len(f)


def dft_inverse(c) -> np.ndarray:
    """Samples ``f_k = sum_n c_n exp(i n x_k)``."""
    c = np.asarray(c, dtype=complex).ravel()
    return _fft(c, +1)


def spectral_sum(c, y) -> np.ndarray:
    """Direct ``sum_n c_n exp(i n y_j)``; the ``O(N M)`` reference for :func:`nufft`."""
    c = np.asarray(c, dtype=complex).ravel()
    y = np.asarray(y, dtype=float).ravel()
    out = np.empty(len(y), dtype=complex)
    n = np.arange(len(c))
    step = max(1, (1 << 21) // max(len(c), 1))
    for s in range(0, len(y), step):
        out[s:s + step] = np.exp(1j * np.outer(y[s:s + step], n)) @ c
    return out


# ---------------------------------------------------------------------------
# Plan cache: setting up the data structure is separate from evaluation
# ---------------------------------------------------------------------------


class _PlanCache:
    def __init__(self, maxsize=8):
        self.maxsize = maxsize
        self._items = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key, build):
        with self._lock:
            if key in self._items:
                self._items.move_to_end(key)
                return self._items[key]
        value = build()
        with self._lock:
            self._items[key] = value
            while len(self._items) > self.maxsize:
                self._items.popitem(last=False)
        return value

    def clear(self):
        with self._lock:
            self._items.clear()


_forward_plans = _PlanCache()
_inverse_plans = _PlanCache()


def clear_plan_cache() -> None:
    _forward_plans.clear()
    _inverse_plans.clear()


def forward_plan(y, N: int, eps: float = 1e-6, policy: str = "optimal",
                 l_max: int | None = None) -> FfiaPlan:
    """Cached plan for :func:`nufft` keyed on ``(targets, eps, N, level choice)``."""
    y = reduce_points(y)
    key = (config_hash(y), float(eps), int(N), policy, l_max)
    return _forward_plans.get(key, lambda: plan_forward(y, N, eps, l_max, policy))


def inverse_plan(y, N: int, eps: float = 1e-6, policy: str = "optimal",
                 l_max: int | None = None) -> tuple[FfiaPlan, InverseCoeffs]:
    """Cached plan and coefficients for :func:`inufft`."""
    y = reduce_points(y)
    key = (config_hash(y), float(eps), int(N), policy, l_max)

    def build():
        plan = plan_inverse(y, N, eps, l_max, policy)
        return plan, precompute_inverse_coeffs(uniform_grid(N), y)

    return _inverse_plans.get(key, build)


def nufft(c, y, eps: float = 1e-6, policy: str = "optimal", l_max: int | None = None) -> np.ndarray:
    """Evaluate ``sum_n c_n exp(i n y_j)`` at scattered ``y`` to accuracy ``eps``."""
    c = np.asarray(c, dtype=complex).ravel()
    _log2(len(c))
    plan = forward_plan(y, len(c), eps, policy, l_max)
    return forward_apply(plan, dft_inverse(c))


def inufft(g, y, eps: float = 1e-6, policy: str = "optimal", l_max: int | None = None) -> np.ndarray:
    """Fourier coefficients of the band-limited function taking values ``g`` at ``y``.

    Requires as many points as coefficients (``M == N``, a power of two).
    """
    g = np.asarray(g, dtype=complex).ravel()
    N = len(g)
    _log2(N)
    plan, coeffs = inverse_plan(y, N, eps, policy, l_max)
    return dft_forward(inverse_apply(plan, coeffs, g))
