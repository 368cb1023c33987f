# How the achieved error follows the requested one (f = 1 is reproduced exactly by
# the interpolant, so |g - 1| is pure algorithm error).
import numpy as np

from ffia import forward_apply, plan_forward

N = 4096
y = np.random.default_rng(42).uniform(0, 2 * np.pi, N)
f = np.ones(N)

print("   eps    q   p  l_max   max|g-1|")
for eps in 10.0 ** -np.arange(3, 13):
    plan = plan_forward(y, N, eps)
    err = np.max(np.abs(forward_apply(plan, f) - 1))
    print("%6.0e  %3d %3d %5d   %.2e" % (eps, plan.q, plan.p, plan.l_max, err))

# the same sweep over tree depths is available from the command line:
#   ffia-bench --mode error-sweep --n 4096 --out sweep.csv
