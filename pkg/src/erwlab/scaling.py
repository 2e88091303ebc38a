"""Rescaled walk paths and the diagnostics behind the scaling limits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cookie_env import CookieLaw, delta as law_delta
from .rng import SeedSpec
from .walk import Timeout, WalkRun, simulate_batch

DIFFUSIVE = "DIFFUSIVE"
BOUNDARY = "BOUNDARY"


class RunTooShort(ValueError):
    pass


class MissingDriftTrace(ValueError):
    pass


def space_scale(n: int, mode: str = DIFFUSIVE) -> float:
    """``sqrt(n)`` or ``sqrt(n) * ln(n)``."""
    if mode == DIFFUSIVE:
        return math.sqrt(n)
    if mode == BOUNDARY:
        return math.sqrt(n) * math.log(n)
    raise ValueError(f"unknown mode {mode!r}")


def time_scale(n: int) -> float:
    """Hitting-time normalization ``n^2 / ln(n)^2``."""
    return n * n / math.log(n) ** 2


@dataclass
class ScaledPath:
    n: int
    times: np.ndarray
    values: np.ndarray
    mode: str
    companions: dict = field(default_factory=dict)

    def at(self, t: float) -> float:
        """``X^{(n)}(t) = X_[nt] / s(n)``."""
        k = int(math.floor(self.n * t + 1e-9))
        if k < 0 or k >= len(self.values):
            raise RunTooShort(f"t={t} outside the rescaled horizon")
        return float(self.values[k])

    def to_csv(self, path) -> None:
        names = ["t", "X"] + sorted(self.companions)
        cols = [self.times, self.values] + [self.companions[c] for c in sorted(self.companions)]
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names),
                   comments="", fmt="%.17g")


def rescale(run: WalkRun, n: int, mode: str = DIFFUSIVE, horizon: float = 1.0,
            companions: bool = False) -> ScaledPath:
    """Grid values ``X_k / s(n)`` at ``t = k/n`` for ``k <= n * horizon``.

    With ``companions`` the running max ``S``, martingale part ``B`` and
    drift part ``C`` are scaled alongside.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    K = int(math.floor(n * horizon + 1e-9))
    if run.n < K:
        raise RunTooShort(f"run has {run.n} steps, need {K}")
    s = space_scale(n, mode)
    extra = {}
    if companions:
        extra["S"] = run.running_max[: K + 1] / s
        c = run.drift_part[: K + 1]
        extra["C"] = c / s
        extra["B"] = (run.positions[: K + 1] - c) / s
    return ScaledPath(n, np.arange(K + 1) / n, run.positions[: K + 1] / s, mode, extra)


def _require_drifts(run: WalkRun, n: int):
    if run.drifts is None or len(run.drifts) < n:
        raise MissingDriftTrace("run has no conditional drift trace up to n")
    if run.n < n:
        raise RunTooShort(f"run has {run.n} steps, need {n}")


def drift_tracking(run: WalkRun, n: int, delta: float) -> float:
    """``max_{k<=n} |C_k - delta * R_k| / sqrt(n)`` with ``R_k`` the range."""
    _require_drifts(run, n)
    c = run.drift_part[: n + 1]
    r = run.ranges[: n + 1]
    return float(np.max(np.abs(c - delta * r)) / math.sqrt(n))


def quad_var_defect(run: WalkRun, n: int) -> float:
    """``(1/n) * sum_{k<n} d_k^2`` over the conditional drifts ``d_k``."""
    _require_drifts(run, n)
    return math.fsum((run.drifts[:n] ** 2).tolist()) / n


def quad_var_bound(run: WalkRun, n: int) -> float:
    return run.M * int(run.ranges[n]) / n


def backtrack(run: WalkRun, n: int | None = None) -> int:
    """``max_{j<=n} (S_j - X_j)``."""
    n = run.n if n is None else n
    if run.n < n:
        raise RunTooShort(f"run has {run.n} steps, need {n}")
    seg = run.positions[: n + 1]
    return int(np.max(np.maximum.accumulate(seg) - seg))


def unvisited_cookie_count(run: WalkRun, interval: tuple[int, int], tau: int | None = None) -> int:
    """Sites in ``[a, b]`` visited fewer than ``M`` times up to ``tau``
    (the visit at time ``tau`` included)."""
    a, b = interval
    if b < a:
        return 0
    tau = run.n if tau is None else tau
    if not 0 <= tau <= run.n:
        raise RunTooShort(f"tau={tau} not recorded")
    seg = run.positions[: tau + 1]
    inside = seg[(seg >= a) & (seg <= b)] - a
    counts = np.bincount(inside, minlength=b - a + 1)
    return int(np.count_nonzero(counts < run.M))


@dataclass
class HitScaling:
    n: int
    levels: np.ndarray
    values: np.ndarray


def _hit_levels(n, levels):
    lv = np.asarray(levels, dtype=np.float64)
    if np.any(lv < 0):
        raise ValueError("levels must be nonnegative")
    return np.floor(n * lv + 1e-9).astype(np.int64)


def _check_boundary(law):
    if abs(law_delta(law) - 1.0) > 1e-12:
        raise ValueError(f"hit scaling needs delta = 1, law has {law_delta(law)}")


def hit_scaling_batch(law: CookieLaw, n: int, levels, master: int, streams, cap: int,
                      workers: int = 1) -> np.ndarray:
    """``T_[n x] / (n^2 / ln^2 n)`` per stream (rows) and level (columns);
    ``nan`` where the walk hit ``cap`` first."""
    _check_boundary(law)
    ks = _hit_levels(n, levels)
    top = int(ks.max())
    streams = np.asarray(streams, dtype=np.int64)
    out = np.zeros((len(streams), len(ks)))
    if top == 0:
        return out
    b = simulate_batch(law, master, streams, cap, target=top, maxhit_levels=top + 1, workers=workers)
    raw = b.maxhit[:, ks].astype(np.float64)
    raw[:, ks == 0] = 0.0
    raw[raw < 0] = np.nan
    return raw / time_scale(n)


def hit_scaling(law: CookieLaw, n: int, levels, seed: SeedSpec, cap: int) -> HitScaling:
    """``T^{(n)}(x)`` at each level from one walk; raises :class:`Timeout`."""
    vals = hit_scaling_batch(law, n, levels, seed.master, [seed.stream], cap)[0]
    if np.any(np.isnan(vals)):
        raise Timeout(int(_hit_levels(n, levels).max()), cap, None)
    return HitScaling(n, np.asarray(levels, dtype=np.float64), vals)
