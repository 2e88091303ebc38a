"""
delta = 1: the boundary case
============================

At delta = 1 the walk is still recurrent but its scale is sqrt(n) log n,
and the limit is a multiple of the running maximum of Brownian motion.
So X_n / (sqrt(n) log n) should look half-normal, up to an unknown
constant D which we only estimate.

The quantile ratio Q(.75)/Q(.25) cancels D, and the half-normal value
is about 3.61.
"""

import numpy as np

from erwlab.cookie_env import DELTA_ONE
from erwlab.scaling import BOUNDARY, space_scale
from erwlab.stats import normal_quantile
from erwlab.walk import simulate_batch

oracle = normal_quantile(0.875) / normal_quantile(0.625)
print(f"half-normal quantile ratio {oracle:.3f}\n")

print("     n   P(Y<-0.05)  Q75/Q25   D est   backtrack/max")
for n in (1_000, 10_000, 100_000):
    b = simulate_batch(DELTA_ONE, 5, np.arange(4000), n)
    s = space_scale(n, BOUNDARY)
    y = b.final / s
    q25, q50, q75 = np.quantile(y, [0.25, 0.5, 0.75])
    bt = np.median(b.backtrack / s) / np.median(b.max / s)
    print(f"{n:6d}   {np.mean(y < -0.05):9.4f}  {q75 / q25:7.2f}  {q50 / normal_quantile(0.75):6.3f}   {bt:.3f}")

# %%
# The backtracking depth does go to zero relative to the maximum, but only
# at the speed of 1/log n. Reaching a ratio of 0.1 needs far larger n than
# a desktop run can afford.
