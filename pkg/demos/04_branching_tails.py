"""
The branching process behind the walk
=====================================

Counting downcrossings of the walk on its way to level n gives a
branching process V with migration: each generation draws the failures
before the (m+1)-th success from a fresh cookie stack. The two sides
agree in law, which verify_dual checks by total variation against a
split-half noise floor.

Excursions of V away from 0 have heavy tails. The lifetime sigma has
tail exponent delta, and so does the square root of the total progeny.
"""

import numpy as np

from erwlab.branching import fit_tail, sample_lifetimes, verify_dual
from erwlab.cookie_env import DELTA_HALF, DELTA_ONE

for law in (DELTA_HALF, DELTA_ONE):
    r = verify_dual(law, 3, 50_000, master=1)
    print(f"{law.name}: TV={r.tv:.4f}  noise floor={r.noise_floor:.4f}  excess={r.excess:+.4f}")
    print("   walk means  ", np.round(r.mean_walk, 3))
    print("   branch means", np.round(r.mean_branch, 3))

# %%
# Lifetime tails
# --------------
# Lifetimes are censored at a generation cap; censored excursions count
# as exceeding every t below the cap, so the fit range has to stay under it.

for law in (DELTA_HALF, DELTA_ONE):
    lb = sample_lifetimes(law, 2, 300_000, 10_000)
    f = fit_tail(lb, "sigma", fit_range=(1e2, 1e4))
    print(f"\n{law.name}: sigma exponent {f.exponent:.3f} +- {f.stderr:.3f}  (Hill {f.hill:.3f})")
    for t, s in f.points[::4]:
        print(f"   P(sigma > {t:8.0f}) = {s:.5f}")
