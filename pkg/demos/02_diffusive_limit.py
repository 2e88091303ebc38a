"""
The diffusive limit for delta < 1
=================================

For 0 <= delta < 1 the walk scaled by sqrt(n) converges to a perturbed
Brownian motion X = B + delta * sup X - delta * inf X. The reference
process is solved on a grid by the per-step fixed point in erwlab.pbm.

We compare the two marginals at t=1 with a two-sample KS distance, and
write the ECDF pair to an SVG so the agreement can be eyeballed.
"""

from pathlib import Path

import numpy as np

from erwlab import plots
from erwlab.cookie_env import DELTA_HALF
from erwlab.pbm import PbmParams, pbm_batch, sample_bm, solve_pbm, pbm_residual
from erwlab.rng import SeedSpec
from erwlab.stats import ks_two_sample
from erwlab.walk import simulate_batch

out = Path("demo_output")
out.mkdir(exist_ok=True)
params = PbmParams.from_delta(0.5)

# one solved path, to see that the fixed point is met to rounding
b = sample_bm(1e-4, 1.0, SeedSpec(0))
x = solve_pbm(b, params)
print("residual of one solved path:", pbm_residual(x, b, params))

# %%
# Marginals at t = 1
# ------------------

paths = 4000
ref = pbm_batch(params, 1e-4, 1.0, 1, np.arange(paths))
for n in (100, 1_000, 10_000):
    walk = simulate_batch(DELTA_HALF, 2, np.arange(paths), n)
    ks = ks_two_sample(walk.final / np.sqrt(n), ref.final)
    print(f"n={n:6d}  KS distance to PBM = {ks.statistic:.4f}  (p={ks.pvalue:.2f})")

grid, fa, fb = plots.ecdf_pair(walk.final / np.sqrt(n), ref.final)
plots.write_svg(out / "diffusive_ecdf.svg", {"walk": (grid, fa), "pbm": (grid, fb)},
                title="X(1): walk vs perturbed BM")

# %%
# How lopsided are the paths?
# ---------------------------
# The perturbation pushes the maximum up and pins the minimum near 0.
# The median of max/(-min) is very sensitive to small minima, so it keeps
# growing as the grid (or n) gets finer.

for dt in (1e-2, 1e-3, 1e-4):
    r = pbm_batch(params, dt, 1.0, 1, np.arange(paths))
    with np.errstate(divide="ignore"):
        print(f"pbm dt={dt:g}: median max/(-min) = {np.median(r.max / -r.min):.2f}")
for n in (1_000, 10_000, 100_000):
    w = simulate_batch(DELTA_HALF, 2, np.arange(paths), n)
    with np.errstate(divide="ignore"):
        print(f"walk n={n}: median max/(-min) = {np.median(w.max / -w.min.astype(float)):.2f}")
