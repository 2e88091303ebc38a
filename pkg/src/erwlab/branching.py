"""Branching process with migration behind the walk's downcrossings.

One generation of ``V`` draws a fresh cookie stack and runs Bernoulli trials
with success probability ``w(i)`` on trial ``i`` (1/2 past the stack); the
next value is the number of failures before the ``(m+1)``-th success. Read
backwards from level ``n``, the downcrossing counts of the walk have the same
law, which gives exact, walk-free samplers for ``T_n`` and for the number of
sites still holding cookies at ``T_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .cookie_env import CookieLaw, pick_atom
from .rng import (TAG_BRANCH, TAG_LEFT, SeedSpec, next_fair_failures, next_uniform,
                  stream_keys)
from .walk import _parallel, simulate_batch

INT64_MAX = np.iinfo(np.int64).max


class InsufficientData(ValueError):
    pass


class RangeBeyondCensoring(ValueError):
    pass


# ---------------------------------------------------------------------------
# kernels

@nb.njit(cache=True, nogil=True)
def _generation(probs, cum, key, ctr, need):
    """Failures before the ``need``-th success at a fresh site."""
    a = pick_atom(cum, next_uniform(key, ctr))
    if need <= 0:
        return np.int64(0)
    fails = np.int64(0)
    succ = 0
    for i in range(probs.shape[1]):
        if next_uniform(key, ctr) < probs[a, i]:
            succ += 1
            if succ == need:
                return fails
        else:
            fails += 1
    return fails + next_fair_failures(key, ctr, need - succ)


@nb.njit(cache=True, nogil=True)
def _excursion(probs, cum, key, cap_gen, cap_prog):
    ctr = np.zeros(1, dtype=np.uint64)
    v = np.int64(0)
    k = np.int64(0)
    total = np.int64(0)
    while True:
        v = _generation(probs, cum, key, ctr, v + 1)
        k += 1
        if v == 0:
            return k, total, False
        total += v
        if k >= cap_gen or total > cap_prog:
            # sigma >= k + 1 and Sigma >= total
            return k + 1, total, True


@nb.njit(cache=True, nogil=True)
def _excursion_batch(probs, cum, keys, cap_gen, cap_prog, sigma, total, censored):
    for i in range(keys.shape[0]):
        s, t, c = _excursion(probs, cum, keys[i], cap_gen, cap_prog)
        sigma[i] = s
        total[i] = t
        censored[i] = c


@nb.njit(cache=True, nogil=True)
def _v_path(probs, cum, key, n, out):
    ctr = np.zeros(1, dtype=np.uint64)
    out[0] = 0
    for k in range(1, n + 1):
        out[k] = _generation(probs, cum, key, ctr, out[k - 1] + 1)


@nb.njit(cache=True, nogil=True)
def _v_path_batch(probs, cum, keys, n, out):
    for i in range(keys.shape[0]):
        _v_path(probs, cum, keys[i], n, out[i])


@nb.njit(cache=True, nogil=True)
def _hit_dual(probs, cum, key_right, key_left, n, left_cap):
    """``(T_n, cookie-holding sites in [0, n-1] at T_n, left depth)``."""
    M = probs.shape[1]
    ctr = np.zeros(1, dtype=np.uint64)
    prev = np.int64(0)
    total = np.int64(0)
    eat = 0
    for k in range(1, n + 1):
        v = _generation(probs, cum, key_right, ctr, prev + 1)
        # visits to site n-k before T_n: (prev + 1) up-jumps + v down-jumps
        if prev + 1 + v < M:
            eat += 1
        total += v
        prev = v
    # sites left of 0 are entered only through 0; D_{n,-j} is the number of
    # failures before the D_{n,-j+1}-th success there
    lctr = np.zeros(1, dtype=np.uint64)
    w = prev
    depth = 0
    while w > 0:
        w = _generation(probs, cum, key_left, lctr, w)
        total += w
        depth += 1
        if depth >= left_cap:
            return np.int64(-1), eat, depth
    return n + 2 * total, eat, depth


@nb.njit(cache=True, nogil=True)
def _hit_dual_batch(probs, cum, keys_r, keys_l, n, left_cap, t_out, eat_out):
    for i in range(keys_r.shape[0]):
        t, e, _ = _hit_dual(probs, cum, keys_r[i], keys_l[i], n, left_cap)
        t_out[i] = t
        eat_out[i] = e


@nb.njit(cache=True, nogil=True)
def _renewals(probs, cum, key, m_max, cap_gen, out):
    """Return times sigma_1..sigma_m of V to 0; -1 past ``cap_gen``."""
    ctr = np.zeros(1, dtype=np.uint64)
    v = np.int64(0)
    k = np.int64(0)
    i = 0
    while i < m_max:
        v = _generation(probs, cum, key, ctr, v + 1)
        k += 1
        if v == 0:
            out[i] = k
            i += 1
        elif k >= cap_gen:
            break
    while i < m_max:
        out[i] = -1
        i += 1


@nb.njit(cache=True, nogil=True)
def _renewal_batch(probs, cum, keys, m_max, cap_gen, out):
    for i in range(keys.shape[0]):
        _renewals(probs, cum, keys[i], m_max, cap_gen, out[i])


def _keys(master, streams, tag):
    return stream_keys(master, np.asarray(streams, dtype=np.int64), tag)


# ---------------------------------------------------------------------------
# sampling API

def v_step(m: int, law: CookieLaw, seed: SeedSpec, counter: int = 0) -> int:
    """One generation from ``V = m``. Pure in ``(m, law, seed, counter)``."""
    if m < 0:
        raise ValueError("m must be >= 0")
    ctr = np.array([counter], dtype=np.uint64)
    return int(_generation(law.prob_table, law.cum_weights, seed.key(TAG_BRANCH), ctr, m + 1))


def v_step_batch(m: int, law: CookieLaw, master: int, streams) -> np.ndarray:
    keys = _keys(master, streams, TAG_BRANCH)
    return _v_step_batch(law.prob_table, law.cum_weights, keys, m)


@nb.njit(cache=True, nogil=True)
def _v_step_batch(probs, cum, keys, m):
    out = np.empty(keys.shape[0], dtype=np.int64)
    ctr = np.zeros(1, dtype=np.uint64)
    for i in range(keys.shape[0]):
        ctr[0] = 0
        out[i] = _generation(probs, cum, keys[i], ctr, m + 1)
    return out


def v_path(law: CookieLaw, seed: SeedSpec, n: int) -> np.ndarray:
    """``V_0, ..., V_n`` with ``V_0 = 0``."""
    out = np.empty(n + 1, dtype=np.int64)
    _v_path(law.prob_table, law.cum_weights, seed.key(TAG_BRANCH), n, out)
    return out


def v_paths(law: CookieLaw, master: int, streams, n: int, workers: int = 1) -> np.ndarray:
    keys = _keys(master, streams, TAG_BRANCH)
    out = np.empty((len(keys), n + 1), dtype=np.int64)
    probs, cum = law.prob_table, law.cum_weights
    _parallel(lambda sl: _v_path_batch(probs, cum, keys[sl], n, out[sl]), len(keys), workers)
    return out


@dataclass(frozen=True)
class LifetimeSample:
    """One excursion of ``V`` away from 0. When ``censored``, ``sigma`` and
    ``total`` are lower bounds."""

    sigma: int
    total: int
    censored: bool = False


@dataclass
class LifetimeBatch:
    sigma: np.ndarray
    total: np.ndarray
    censored: np.ndarray
    cap_generations: int = 0
    cap_progeny: int = 0

    def __len__(self):
        return len(self.sigma)

    def __getitem__(self, i) -> LifetimeSample:
        return LifetimeSample(int(self.sigma[i]), int(self.total[i]), bool(self.censored[i]))

    def to_csv(self, path) -> None:
        data = np.column_stack([self.sigma, self.total, self.censored.astype(np.int64)])
        np.savetxt(path, data, fmt="%d", delimiter=",", header="sigma,total,censored", comments="")


def sample_lifetime(law: CookieLaw, seed: SeedSpec, cap_generations: int,
                    cap_progeny: int | None = None) -> LifetimeSample:
    """Lifetime and total progeny of one excursion from ``V_0 = 0``."""
    if cap_generations < 1:
        raise ValueError("cap_generations must be >= 1")
    s, t, c = _excursion(law.prob_table, law.cum_weights, seed.key(TAG_BRANCH),
                         cap_generations, INT64_MAX if cap_progeny is None else cap_progeny)
    return LifetimeSample(int(s), int(t), bool(c))


def sample_lifetimes(law: CookieLaw, master: int, count: int, cap_generations: int,
                     cap_progeny: int | None = None, first_stream: int = 0,
                     workers: int = 1) -> LifetimeBatch:
    """``count`` i.i.d. excursions, stream ids ``first_stream..``."""
    if cap_generations < 1:
        raise ValueError("cap_generations must be >= 1")
    keys = _keys(master, np.arange(first_stream, first_stream + count), TAG_BRANCH)
    sigma = np.empty(count, np.int64)
    total = np.empty(count, np.int64)
    cens = np.empty(count, np.bool_)
    cp = INT64_MAX if cap_progeny is None else int(cap_progeny)
    probs, cum = law.prob_table, law.cum_weights
    _parallel(lambda sl: _excursion_batch(probs, cum, keys[sl], cap_generations, cp,
                                          sigma[sl], total[sl], cens[sl]), count, workers)
    return LifetimeBatch(sigma, total, cens, cap_generations, cap_progeny or 0)


def renewal_times(law: CookieLaw, master: int, streams, m_max: int, cap_generations: int,
                  workers: int = 1) -> np.ndarray:
    """Row ``r``: ``sigma_1..sigma_{m_max}`` for stream ``r``; -1 where censored."""
    keys = _keys(master, streams, TAG_BRANCH)
    out = np.empty((len(keys), m_max), dtype=np.int64)
    probs, cum = law.prob_table, law.cum_weights
    _parallel(lambda sl: _renewal_batch(probs, cum, keys[sl], m_max, cap_generations, out[sl]),
              len(keys), workers)
    return out


@dataclass
class DualHits:
    """``T_n`` and cookie-holding site counts sampled through the
    downcrossing chain. ``T = -1`` marks a left excursion deeper than the cap."""

    n: int
    hitting_time: np.ndarray
    eat: np.ndarray


def sample_hits_dual(law: CookieLaw, master: int, streams, n: int,
                     left_cap: int = 10**7, workers: int = 1) -> DualHits:
    keys_r = _keys(master, streams, TAG_BRANCH)
    keys_l = _keys(master, streams, TAG_LEFT)
    T = np.empty(len(keys_r), np.int64)
    E = np.empty(len(keys_r), np.int64)
    probs, cum = law.prob_table, law.cum_weights
    _parallel(lambda sl: _hit_dual_batch(probs, cum, keys_r[sl], keys_l[sl], n, left_cap,
                                         T[sl], E[sl]), len(keys_r), workers)
    return DualHits(n, T, E)


# ---------------------------------------------------------------------------
# tail fitting

@dataclass
class TailFit:
    exponent: float
    constant: float
    stderr: float
    fit_range: tuple[float, float]
    hill: float
    hill_stderr: float
    field: str
    transform: str
    n_samples: int
    n_censored: int
    points: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "constant": self.constant,
            "stderr": self.stderr,
            "fit_range": list(self.fit_range),
            "estimator": "ols_log_survival",
            "hill": self.hill,
            "hill_stderr": self.hill_stderr,
            "field": self.field,
            "transform": self.transform,
            "n_samples": self.n_samples,
            "n_censored": self.n_censored,
        }


MIN_UNCENSORED = 10_000


def fit_tail(samples, field: str = "sigma", transform: str = "identity",
             fit_range: tuple[float, float] = (1e2, 1e4), n_points: int = 20,
             min_uncensored: int = MIN_UNCENSORED) -> TailFit:
    """Fit ``P(X > t) ~ C t^-a`` on log-spaced ``t`` in ``fit_range``.

    ``samples`` is a :class:`LifetimeBatch` (``field`` picks sigma or total)
    or a plain array of uncensored values. ``transform="sqrt"`` regresses the
    survival of ``sqrt(X)``, i.e. ``P(Sigma > t^2)``. Censored samples carry
    lower bounds; a threshold at which some censored bound does not already
    exceed it cannot be evaluated and raises :class:`RangeBeyondCensoring`.
    """
    if isinstance(samples, LifetimeBatch):
        if field not in ("sigma", "total"):
            raise ValueError(f"unknown field {field!r}")
        values = np.asarray(getattr(samples, field), dtype=np.float64)
        cens = np.asarray(samples.censored, dtype=bool)
    else:
        values = np.asarray(samples, dtype=np.float64)
        cens = np.zeros(values.shape, dtype=bool)
    if transform == "sqrt":
        values = np.sqrt(values)
    elif transform != "identity":
        raise ValueError(f"unknown transform {transform!r}")
    lo, hi = map(float, fit_range)
    if not 0 < lo < hi:
        raise ValueError("fit range must satisfy 0 < lo < hi")
    n_unc = int((~cens).sum())
    if n_unc < min_uncensored:
        raise InsufficientData(f"{n_unc} uncensored samples, need {min_uncensored}")

    N = len(values)
    unc = np.sort(values[~cens])
    bounds = values[cens]
    min_bound = bounds.min() if bounds.size else np.inf
    if min_bound <= hi:
        raise RangeBeyondCensoring(
            f"censored lower bound {min_bound:g} does not clear the fit range top {hi:g}")
    ts = np.geomspace(lo, hi, n_points)
    exceed = (len(unc) - np.searchsorted(unc, ts, side="right")) + bounds.size
    if np.any(exceed == 0):
        raise InsufficientData("no samples beyond the top of the fit range")
    surv = exceed / N
    lx, ly = np.log(ts), np.log(surv)
    A = np.column_stack([np.ones_like(lx), lx])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = max(len(lx) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    slope_se = math.sqrt(cov[1, 1])

    # censored-Pareto MLE above the lower end of the range
    tail_unc = unc[unc > lo]
    d = len(tail_unc)
    logs = np.log(tail_unc / lo).sum() + np.log(bounds / lo).sum()
    hill = d / logs if logs > 0 else float("nan")
    hill_se = hill / math.sqrt(d) if d else float("nan")

    return TailFit(
        exponent=float(-coef[1]), constant=float(math.exp(coef[0])), stderr=slope_se,
        fit_range=(lo, hi), hill=float(hill), hill_stderr=float(hill_se),
        field=field, transform=transform, n_samples=N, n_censored=int(cens.sum()),
        points=np.column_stack([ts, surv]),
    )


# ---------------------------------------------------------------------------
# duality check

@dataclass
class DualReport:
    n: int
    tv: float
    noise_floor: float
    excess: float
    mean_walk: np.ndarray
    mean_branch: np.ndarray
    mean_z: np.ndarray
    walk_samples: int
    branch_samples: int
    timeouts: int
    clip: int
    walk_rows: np.ndarray | None = field(default=None, repr=False)
    branch_rows: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "tv": self.tv, "noise_floor": self.noise_floor,
            "excess": self.excess, "mean_walk": self.mean_walk.tolist(),
            "mean_branch": self.mean_branch.tolist(), "mean_z": self.mean_z.tolist(),
            "walk_samples": self.walk_samples, "branch_samples": self.branch_samples,
            "timeouts": self.timeouts, "clip": self.clip,
        }


def _codes(rows, clip):
    c = np.minimum(rows, clip)
    base = clip + 1
    return (c * base ** np.arange(rows.shape[1])).sum(axis=1)


def tv_distance(a_rows, b_rows, clip) -> float:
    """Total variation between empirical joint laws, coordinates clipped at ``clip``."""
    ca, cb = _codes(a_rows, clip), _codes(b_rows, clip)
    size = int(max(ca.max(initial=0), cb.max(initial=0))) + 1
    pa = np.bincount(ca, minlength=size) / len(ca)
    pb = np.bincount(cb, minlength=size) / len(cb)
    return 0.5 * float(np.abs(pa - pb).sum())


def _split_half(rows, clip):
    h = len(rows) // 2
    return tv_distance(rows[:h], rows[h:2 * h], clip)


def walk_downcrossing_vectors(law: CookieLaw, master: int, n: int, samples: int,
                              cap: int = 10**7, workers: int = 1):
    """Rows ``(D_{n,n-1}, ..., D_{n,0})`` from walks stopped at ``T_n``.

    Returns ``(rows, timeouts)``; runs that miss ``n`` within ``cap`` are
    dropped and counted.
    """
    b = simulate_batch(law, master, np.arange(samples), cap, target=n,
                       down_sites=n, workers=workers)
    rows = b.down[b.hit][:, ::-1]
    return rows, int((~b.hit).sum())


def verify_dual(law: CookieLaw, n: int, samples: int, master: int = 0,
                clip: int = 12, cap: int = 10**7, workers: int = 1) -> DualReport:
    """Compare ``(V_1..V_n)`` with the walk's ``(D_{n,n-1}..D_{n,0})``.

    The noise floor is the split-half self-distance averaged over both sides,
    divided by sqrt(2) (halves carry twice the sampling variance); ``excess``
    is the TV distance above that floor.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    walk_rows, timeouts = walk_downcrossing_vectors(law, master, n, samples, cap, workers)
    branch_rows = v_paths(law, master, np.arange(samples), n, workers)[:, 1:]
    tv = tv_distance(walk_rows, branch_rows, clip)
    floor = 0.5 * (_split_half(walk_rows, clip) + _split_half(branch_rows, clip)) / math.sqrt(2)
    mw, mb = walk_rows.mean(axis=0), branch_rows.mean(axis=0)
    se = np.sqrt(walk_rows.var(axis=0) / len(walk_rows) + branch_rows.var(axis=0) / len(branch_rows))
    z = np.where(se > 0, (mw - mb) / np.where(se > 0, se, 1.0), 0.0)
    return DualReport(n, tv, floor, tv - floor, mw, mb, z, len(walk_rows), len(branch_rows),
                      timeouts, clip, walk_rows, branch_rows)
