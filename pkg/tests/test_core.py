import math

import numpy as np
import pytest

from ffia.core import (RegularPart, accumulate_moments, build_plan, check_separation,
                       cot_sum_apply, direct_forward_oracle, direct_inverse_oracle,
                       eval_regular, forward_apply, forward_matrix, inverse_apply,
                       inverse_matrix, plan_forward, plan_inverse, precompute_inverse_coeffs,
                       uniform_grid)
from ffia.exceptions import DegenerateConfigurationError, InvalidArgumentError
from ffia.partition import QUADRANT_CENTERS, near_shift, opposite_shift, quadrant_of
from ffia.special import (build_bernoulli_ratios, cot_series_tail, kernel_G, modulation_F,
                          periodic_diff, tan_series, total_error_bound)

TWO_PI = 2 * math.pi


def perturbed_grid(N, seed, frac=0.10):
    rng = np.random.default_rng(seed)
    return np.mod(uniform_grid(N) + rng.uniform(-1, 1, N) * frac * TWO_PI / N, TWO_PI)


def unreordered_regular(x, w, y, q):
    """Double sum over sources of the cot tail (near set) and tan series (far set)."""
    table = build_bernoulli_ratios(q)
    out = np.zeros(len(y), dtype=complex)
    qy, qx = quadrant_of(y), quadrant_of(x)
    for j, (yy, n) in enumerate(zip(y, qy)):
        c = QUADRANT_CENTERS[n]
        far = qx == (n + 2) % 4
        t1 = yy - near_shift(x[~far], c)
        t2 = yy - opposite_shift(x[far], c)
        out[j] = (np.sum(w[~far] * cot_series_tail(t1, q, table))
                  + np.sum(w[far] * tan_series(t2, q, table)))
    return out


def direct_cot_sum(x, y, w):
    return np.array([np.sum(w / np.tan(0.5 * periodic_diff(yy, x))) for yy in y])


# -- regular part ------------------------------------------------------------


def test_zero_weights_give_zero_moments():
    plan = plan_forward(np.linspace(0.1, 6, 20), 32, 1e-6)
    part = accumulate_moments(plan, np.zeros(32))
    assert not np.any(part.alpha1) and not np.any(part.alpha2) and not np.any(part.d)


def test_single_source_at_center():
    x = np.array([QUADRANT_CENTERS[1], 5.0])
    plan = build_plan(x, [0.3], 1e-6, l_max=3)
    part = accumulate_moments(plan, np.array([1.0, 0.0]))
    assert part.alpha1[1, 0] == 1 and np.all(part.alpha1[1, 1:] == 0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_moment_reordering_identity(seed):
    rng = np.random.default_rng(seed)
    N = 64
    plan = plan_forward(rng.uniform(0, TWO_PI, 10), N, 1e-9)
    w = rng.normal(size=N) + 1j * rng.normal(size=N)
    part = accumulate_moments(plan, w)
    for n in range(4):
        y = rng.uniform(n * math.pi / 2, (n + 1) * math.pi / 2, 50)
        got = eval_regular(part, y, n)
        ref = unreordered_regular(plan.sources, w, y, plan.q)
        assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_eval_regular_constant_and_zero():
    q = 3
    zero = RegularPart(*(np.zeros((4, 2 * q), complex),) * 3, QUADRANT_CENTERS)
    assert eval_regular(zero, 1.0, 0) == 0
    d = np.zeros((4, 2 * q), complex)
    d[:, 0] = 2.5 - 1j
    part = RegularPart(d * 0, d * 0, d, QUADRANT_CENTERS)
    assert np.allclose(eval_regular(part, np.array([0.2, 1.9, 4.0]), np.array([0, 1, 2])), -(2.5 - 1j))


def test_eval_regular_matches_naive_sum():
    rng = np.random.default_rng(4)
    q = 6
    d = rng.normal(size=(4, 2 * q)) + 1j * rng.normal(size=(4, 2 * q))
    part = RegularPart(d * 0, d * 0, d, QUADRANT_CENTERS)
    y = rng.uniform(0, TWO_PI, 40)
    quad = quadrant_of(y)
    naive = np.array([-sum(d[n, l] / math.factorial(l) * (yy - QUADRANT_CENTERS[n]) ** l
                           for l in range(2 * q)) for yy, n in zip(y, quad)])
    assert np.max(np.abs(eval_regular(part, y, quad) - naive)) <= 1e-13 * np.max(np.abs(naive))


# -- cotangent sum -----------------------------------------------------------


def test_cot_sum_within_bound():
    rng = np.random.default_rng(12)
    N = 256
    x = uniform_grid(N)
    y = rng.uniform(0, TWO_PI, N)
    w = rng.uniform(-1, 1, N) + 1j * rng.uniform(-1, 1, N)
    plan = plan_forward(y, N, 1e-6)
    err = np.max(np.abs(cot_sum_apply(plan, w) - direct_cot_sum(x, y, w)))
    assert err <= total_error_bound(plan.q, plan.p, plan.l_max) * np.sum(np.abs(w))


def test_cot_sum_single_weight():
    rng = np.random.default_rng(13)
    N = 128
    y = rng.uniform(0, TWO_PI, 300)
    plan = plan_forward(y, N, 1e-6)
    w = np.zeros(N)
    w[37] = 1.0
    ref = 1 / np.tan(0.5 * periodic_diff(y, uniform_grid(N)[37]))
    bound = total_error_bound(plan.q, plan.p, plan.l_max)
    assert np.max(np.abs(cot_sum_apply(plan, w) - ref)) <= bound


def test_cot_sum_antisymmetry():
    x0 = 2.0
    targets = np.array([x0 - 0.05, x0 + 0.05, x0 - 0.3, x0 + 0.3])
    plan = build_plan([x0, 4.5], targets, 1e-9, l_max=5)
    h = cot_sum_apply(plan, np.array([1.0, 0.0]))
    assert abs(h[0] + h[1]) <= 1e-12 * abs(h[0])
    assert abs(h[2] + h[3]) <= 1e-12 * abs(h[2])


# -- forward transform -------------------------------------------------------


@pytest.mark.parametrize("N", [16, 256, 1024])
def test_constant_reproduced(N):
    y = np.random.default_rng(N).uniform(0, TWO_PI, 2 * N)
    g = forward_apply(plan_forward(y, N, 1e-6), np.ones(N))
    assert np.max(np.abs(g - 1)) <= 1e-6


def test_target_on_grid_returns_sample():
    N = 64
    x = uniform_grid(N)
    f = np.random.default_rng(0).normal(size=N)
    y = np.array([x[5], 1.0, x[0], x[63]])
    plan = plan_forward(y, N, 1e-9)
    assert len(plan.coincidences) == 3
    g = forward_apply(plan, f)
    assert g[0] == f[5] and g[2] == f[0] and g[3] == f[63]
    assert g[1] == pytest.approx(direct_forward_oracle(f, x, y[1:2])[0], abs=1e-9)


def test_harmonic():
    N = 512
    y = np.random.default_rng(2).uniform(0, TWO_PI, 700)
    g = forward_apply(plan_forward(y, N, 1e-6), np.exp(1j * uniform_grid(N)))
    assert np.max(np.abs(g - np.exp(1j * y))) <= 1e-6


def test_forward_matches_oracle_at_tight_eps():
    rng = np.random.default_rng(21)
    N = 512
    y = rng.uniform(0, TWO_PI, N)
    f = rng.uniform(0, 1, N)
    g = forward_apply(plan_forward(y, N, 1e-12), f)
    assert np.max(np.abs(g - direct_forward_oracle(f, uniform_grid(N), y))) <= 1e-10


def test_forward_plan_kind_checks():
    plan = plan_forward([0.5, 1.0], 16)
    with pytest.raises(InvalidArgumentError):
        forward_apply(plan, np.ones(8))
    inv = plan_inverse(perturbed_grid(16, 0), 16)
    with pytest.raises(InvalidArgumentError):
        forward_apply(inv, np.ones(16))
    with pytest.raises(InvalidArgumentError):
        plan_inverse([0.1, 0.2], 16)


# -- direct oracles ----------------------------------------------------------


def test_oracle_constant_and_row_sums():
    N = 128
    y = np.random.default_rng(3).uniform(0, TWO_PI, 90)
    K = forward_matrix(uniform_grid(N), y)
    assert np.allclose(K.sum(axis=1), 1, atol=1e-12)
    assert np.allclose(direct_forward_oracle(np.ones(N), uniform_grid(N), y), 1, atol=1e-12)


def test_oracle_impulse_column():
    N = 4
    y = np.array([0.3, 1.1, 2.9, 5.0])
    f = np.array([1.0, 0, 0, 0])
    assert np.allclose(direct_forward_oracle(f, uniform_grid(N), y),
                       modulation_F(y, N) * kernel_G(y), atol=1e-15)


def test_oracle_is_trigonometric_interpolation():
    """K f equals the band-limited interpolant built from the DFT of f."""
    N = 32
    rng = np.random.default_rng(6)
    f = rng.normal(size=N) + 1j * rng.normal(size=N)
    c = np.fft.fft(f) / N
    y = rng.uniform(0, TWO_PI, 40)
    ref = np.exp(1j * np.outer(y, np.arange(N))) @ c
    assert np.allclose(direct_forward_oracle(f, uniform_grid(N), y), ref, atol=1e-12)


# -- inverse coefficients and transform -------------------------------------


def test_two_point_coefficients():
    co = precompute_inverse_coeffs([0.0, math.pi], [math.pi / 2, 3 * math.pi / 2])
    assert co.C[0] == pytest.approx(0.5, abs=1e-15)
    assert co.C[1] == pytest.approx(-math.sin(math.pi / 4) * math.sin(-math.pi / 4), abs=1e-15)


def test_coefficient_magnitudes():
    N = 16
    y = perturbed_grid(N, 1)
    co = precompute_inverse_coeffs(uniform_grid(N), y)
    for j in range(N):
        others = np.delete(y, j)
        assert abs(co.D[j]) == pytest.approx(2 / np.prod(np.abs(np.sin((y[j] - others) / 2))), rel=1e-12)
        ref = 2j * np.exp(-0.5j * N * y[j]) / np.prod(np.sin((y[j] - others) / 2))
        assert co.D[j] == pytest.approx(ref, rel=1e-10)
    x = uniform_grid(N)
    for k in range(N):
        assert co.C[k] == pytest.approx((-1) ** k * np.prod(np.sin((x[k] - y) / 2)), rel=1e-12)


@pytest.mark.parametrize("N", [8, 32, 128])
def test_inverse_matrix_inverts_forward(N):
    y = perturbed_grid(N, N)
    x = uniform_grid(N)
    co = precompute_inverse_coeffs(x, y)
    L = inverse_matrix(x, y, co)
    K = forward_matrix(x, y)
    assert np.max(np.abs(L @ K - np.eye(N))) <= 1e-10


def test_shifted_grid_round_trip():
    N = 8
    y = uniform_grid(N) + math.pi / N
    f = np.random.default_rng(0).normal(size=N)
    g = forward_apply(plan_forward(y, N, 1e-12), f)
    co = precompute_inverse_coeffs(uniform_grid(N), y)
    back = inverse_apply(plan_inverse(y, N, 1e-12), co, g)
    assert np.max(np.abs(back - f)) <= 1e-9


def test_inverse_small_perturbed():
    N = 8
    y = perturbed_grid(N, 7)
    f = np.random.default_rng(1).normal(size=N)
    g = direct_forward_oracle(f, uniform_grid(N), y)
    co = precompute_inverse_coeffs(uniform_grid(N), y)
    assert np.max(np.abs(inverse_apply(plan_inverse(y, N, 1e-12), co, g) - f)) <= 1e-8
    assert np.max(np.abs(direct_inverse_oracle(g, uniform_grid(N), y, co) - f)) <= 1e-12


def test_inverse_zero_and_single_column():
    N = 64
    y = perturbed_grid(N, 3)
    x = uniform_grid(N)
    co = precompute_inverse_coeffs(x, y)
    plan = plan_inverse(y, N, 1e-9)
    assert np.all(inverse_apply(plan, co, np.zeros(N)) == 0)
    g = np.zeros(N, complex)
    g[11] = 1.0
    row = inverse_matrix(x, y, co)[:, 11]
    got = inverse_apply(plan, co, g)
    assert np.max(np.abs(got - row)) <= 1e-9 * max(1.0, np.max(np.abs(row)))


def test_inverse_large_n_does_not_overflow():
    N = 2048
    y = perturbed_grid(N, 5)
    co = precompute_inverse_coeffs(uniform_grid(N), y)
    assert np.all(np.isfinite(co.log_c)) and np.all(np.isfinite(co.log_d))
    c, d = co.scaled()
    assert np.all(np.isfinite(c)) and np.all(np.isfinite(d))
    f = np.random.default_rng(0).uniform(size=N)
    g = forward_apply(plan_forward(y, N, 1e-12), f)
    back = inverse_apply(plan_inverse(y, N, 1e-12), co, g)
    assert np.max(np.abs(back - f)) <= 1e-8


def test_degenerate_configurations():
    x = uniform_grid(8)
    y = x + 0.3
    y[5] = y[4] + 1e-12
    with pytest.raises(DegenerateConfigurationError) as err:
        precompute_inverse_coeffs(x, y)
    assert set(err.value.pair) == {4, 5}
    y = x + 0.3
    y[2] = x[6] + 1e-13
    with pytest.raises(DegenerateConfigurationError):
        check_separation(x, y)


def test_coefficients_from_other_configuration_rejected():
    N = 16
    y1, y2 = perturbed_grid(N, 1), perturbed_grid(N, 2)
    co = precompute_inverse_coeffs(uniform_grid(N), y1)
    with pytest.raises(InvalidArgumentError):
        inverse_apply(plan_inverse(y2, N), co, np.ones(N))
