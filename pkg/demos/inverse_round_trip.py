# Recover Fourier coefficients from values at jittered grid points, then go back.
import numpy as np

from ffia import inufft, nufft, uniform_grid

N = 512
rng = np.random.default_rng(7)

# grid points moved by up to 10% of the spacing
y = np.mod(uniform_grid(N) + rng.uniform(-1, 1, N) * 0.1 * 2 * np.pi / N, 2 * np.pi)

c = rng.normal(size=N) + 1j * rng.normal(size=N)
g = nufft(c, y, eps=1e-9)  # values of the band-limited function at y
c_back = inufft(g, y, eps=1e-9)  # and back to coefficients

print("round-trip error: %.2e" % np.max(np.abs(c_back - c)))

# cross-check against a dense solve of the square system
A = np.exp(1j * np.outer(y, np.arange(N)))
print("vs dense solve:   %.2e" % np.max(np.abs(c_back - np.linalg.solve(A, g))))
