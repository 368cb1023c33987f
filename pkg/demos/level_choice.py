# Evaluation time against tree depth: shallow trees pay for direct near-field sums,
# deep trees for translations, and the minimum sits in between.
import time

import numpy as np

from ffia import choose_parameters, forward_apply, plan_forward

N = 1 << 14
y = np.random.default_rng(1).uniform(0, 2 * np.pi, N)
f = np.random.default_rng(2).uniform(0, 1, N)

timings = {}
for l_max in range(5, 14):
    plan = plan_forward(y, N, 1e-6, l_max=l_max)
    forward_apply(plan, f)  # warm-up
    t0 = time.perf_counter()
    for _ in range(3):
        forward_apply(plan, f)
    timings[l_max] = (time.perf_counter() - t0) / 3
    print("l_max=%2d  p=%2d  %.1f ms" % (l_max, plan.p, 1e3 * timings[l_max]))

best = min(timings, key=timings.get)
print("fastest depth:", best, "= log2 N -", int(np.log2(N)) - best)
print("cost-model choice:", choose_parameters(1e-6, N, N).l_max)
print("empirical rule:   ", choose_parameters(1e-6, N, N, policy="empirical").l_max)
