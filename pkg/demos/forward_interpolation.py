# Resample a band-limited signal from a uniform grid onto scattered points.
import numpy as np

from ffia import dft_forward, nufft, spectral_sum, uniform_grid

N = 1024
rng = np.random.default_rng(0)

# frequencies run over 0..N-1, so pick a signal built from non-negative ones:
# 1 / (1 - z/2) = sum_n 2^-n z^n with z = exp(i x)
def signal(t):
    return 1 / (1 - 0.5 * np.exp(1j * t))


x = uniform_grid(N)
f = signal(x)

# its N Fourier coefficients (frequencies 0..N-1)
c = dft_forward(f)

# 1500 arbitrary points on the circle
y = rng.uniform(0, 2 * np.pi, 1500)

g_fast = nufft(c, y, eps=1e-9)
g_slow = spectral_sum(c, y)  # O(N M) reference
g_true = signal(y)

print("fast vs direct sum:     %.2e" % np.max(np.abs(g_fast - g_slow)))
print("fast vs analytic value: %.2e" % np.max(np.abs(g_fast - g_true)))

# looser tolerance, cheaper plan
for eps in (1e-3, 1e-6, 1e-12):
    err = np.max(np.abs(nufft(c, y, eps=eps) - g_slow))
    print("eps=%-6g error=%.2e" % (eps, err))
