"""Excited random walk under the averaged measure.

Each replica draws its own environment lazily: the stack at site ``z`` comes
from the environment sub-stream keyed by ``(seed, z)`` and the coin used on
the i-th visit to ``z`` from the noise sub-stream keyed by ``(seed, z, i)``.
Changing only the noise salt therefore re-runs the walk in the same
environment (quenched re-runs).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numba as nb
import numpy as np

from .cookie_env import CookieLaw, atom_at_site, delta as law_delta, sample_stack
from .rng import TAG_ENV, TAG_NOISE, SeedSpec, stream_keys, uniform_at

EXACT_PMF_MAX_N = 14
# target value meaning "stop at the first return to the origin"
RETURN_TO_ORIGIN = -(1 << 62)


class Timeout(RuntimeError):
    """The walk did not reach its target within the step cap."""

    def __init__(self, target, cap, position):
        super().__init__(f"target {target} not hit within {cap} steps (at {position})")
        self.target = target
        self.cap = cap
        self.position = position


class MissingHit(ValueError):
    pass


class HorizonTooLarge(ValueError):
    pass


def noise_tag(salt: int) -> int:
    return TAG_NOISE + (int(salt) << 8)


# ---------------------------------------------------------------------------
# kernel



def _empty_i64():
    return np.empty(0, dtype=np.int64)


# integer state slots
_T, _X, _S, _LO, _BACK, _HIT = range(6)
# float state slots
_C, _SUMD2, _GAP = range(3)


@nb.njit(cache=True, nogil=True)
def _segment(probs, cum, env_key, noise_key, max_steps, target, delta,
             lt, atom, off, ist, fst,
             pos_out, drift_out, down_out, maxhit_out, cp_times, cp_out, cpi):
    """Advance until done or until the walk leaves the buffer.

    Returns ``(status, cpi)``; status 1 asks the caller to grow the buffer.
    """
    M = probs.shape[1]
    size = lt.shape[0]
    rec_pos = pos_out.shape[0] > 0
    rec_drift = drift_out.shape[0] > 0
    n_down = down_out.shape[0]
    n_maxhit = maxhit_out.shape[0]
    n_cp = cp_times.shape[0]

    t = ist[_T]
    x = ist[_X]
    s = ist[_S]
    lo = ist[_LO]
    maxback = ist[_BACK]
    c = fst[_C]
    sumd2 = fst[_SUMD2]
    gap = fst[_GAP]
    status = 0
    ret = target == RETURN_TO_ORIGIN
    while t < max_steps:
        if (x == target and target != 0) or (ret and x == 0 and t > 0):
            break
        idx = x + off
        if idx < 0 or idx >= size:
            status = 1
            break
        v = lt[idx] + 1
        lt[idx] = v
        if v <= M:
            a = atom[idx]
            if a < 0:
                a = atom_at_site(cum, env_key, x)
                atom[idx] = a
            p = probs[a, v - 1]
            d = 2.0 * p - 1.0
            c += d
            sumd2 += d * d
        else:
            p = 0.5
            d = 0.0
        if rec_drift:
            drift_out[t] = d
        if uniform_at(noise_key, x, v) < p:
            x += 1
            if x > s:
                s = x
                if s < n_maxhit:
                    maxhit_out[s] = t + 1
        else:
            if x < n_down and x >= 0:
                down_out[x] += 1
            x -= 1
            if x < lo:
                lo = x
            if s - x > maxback:
                maxback = s - x
        t += 1
        if v <= M or x == s or x == lo:
            g = abs(c - delta * (s - lo + 1))
            if g > gap:
                gap = g
        if rec_pos:
            pos_out[t] = x
        while cpi < n_cp and cp_times[cpi] == t:
            cp_out[cpi] = x
            cpi += 1
    ist[_T] = t
    ist[_X] = x
    ist[_S] = s
    ist[_LO] = lo
    ist[_BACK] = maxback
    ist[_HIT] = 1 if ((target != 0 and x == target) or (ret and x == 0 and t > 0)) else 0
    fst[_C] = c
    fst[_SUMD2] = sumd2
    fst[_GAP] = gap
    return status, cpi


@nb.njit(cache=True, nogil=True)
def _walk_one(probs, cum, env_key, noise_key, max_steps, target, delta,
              lt, atom, pos_out, drift_out, down_out, maxhit_out, cp_times, cp_out,
              eat_lo, eat_hi, ist, fst):
    """One full walk. ``lt``/``atom`` are zero / -1 work buffers, returned
    cleared (possibly enlarged) for reuse."""
    M = probs.shape[1]
    ist[:] = 0
    fst[:] = 0.0
    fst[_GAP] = abs(delta)
    if pos_out.shape[0] > 0:
        pos_out[0] = 0
    cpi = 0
    while cpi < cp_times.shape[0] and cp_times[cpi] == 0:
        cp_out[cpi] = 0
        cpi += 1
    off = lt.shape[0] // 2
    while True:
        status, cpi = _segment(probs, cum, env_key, noise_key, max_steps, target, delta,
                               lt, atom, off, ist, fst, pos_out, drift_out, down_out,
                               maxhit_out, cp_times, cp_out, cpi)
        if status == 0:
            break
        size = lt.shape[0]
        half = size // 2
        nlt = np.zeros(2 * size, dtype=lt.dtype)
        natom = np.full(2 * size, -1, dtype=atom.dtype)
        nlt[half:half + size] = lt
        natom[half:half + size] = atom
        lt = nlt
        atom = natom
        off += half

    x = ist[_X]
    eat = 0
    if eat_hi >= eat_lo:
        for m in range(eat_lo, eat_hi + 1):
            j = m + off
            lm = 0
            if 0 <= j < lt.shape[0]:
                lm = lt[j]
            if m == x:
                lm += 1
            if lm < M:
                eat += 1
    # clear the visited window; buffers are centred on ``off``
    for j in range(ist[_LO] + off, ist[_S] + off + 1):
        lt[j] = 0
        atom[j] = -1
    # recentre for the next walk
    if off != lt.shape[0] // 2:
        lt2 = np.zeros(lt.shape[0], dtype=lt.dtype)
        atom2 = np.full(lt.shape[0], -1, dtype=atom.dtype)
        lt = lt2
        atom = atom2
    return lt, atom, eat


def _buffers(max_steps):
    size = 2 * min(int(max_steps) + 2, 1 << 15)
    return np.zeros(size, dtype=np.int32), np.full(size, -1, dtype=np.int16)


@nb.njit(cache=True, nogil=True)
def _walk_batch(probs, cum, env_keys, noise_keys, max_steps, target, delta,
                cp_times, eat_lo, eat_hi, lt, atom,
                steps, final, smax, smin, back, gap, sumd2, drift, hit, eat,
                cp_out, down_out, maxhit_out):
    no_pos = np.empty(0, dtype=np.int64)
    no_drift = np.empty(0, dtype=np.float64)
    ist = np.zeros(6, dtype=np.int64)
    fst = np.zeros(3, dtype=np.float64)
    for r in range(env_keys.shape[0]):
        lt, atom, e = _walk_one(probs, cum, env_keys[r], noise_keys[r], max_steps, target,
                                delta, lt, atom, no_pos, no_drift, down_out[r], maxhit_out[r],
                                cp_times, cp_out[r], eat_lo, eat_hi, ist, fst)
        steps[r] = ist[_T]
        final[r] = ist[_X]
        smax[r] = ist[_S]
        smin[r] = ist[_LO]
        back[r] = ist[_BACK]
        hit[r] = ist[_HIT] == 1
        drift[r] = fst[_C]
        sumd2[r] = fst[_SUMD2]
        gap[r] = fst[_GAP]
        eat[r] = e


def _single(law, seed, max_steps, target, noise_salt, pos, dr):
    e = _empty_i64()
    lt, atom = _buffers(max_steps)
    ist = np.zeros(6, dtype=np.int64)
    fst = np.zeros(3)
    _walk_one(law.prob_table, law.cum_weights, seed.key(TAG_ENV),
              seed.key(noise_tag(noise_salt)), max_steps, target, law_delta(law),
              lt, atom, pos, dr, e, e, e, e, 0, -1, ist, fst)
    return ist, fst


# ---------------------------------------------------------------------------
# single trajectories

@dataclass
class WalkState:
    """Walk position with local times ``L_m(time)`` (visits up to and
    including the current time)."""

    position: int = 0
    time: int = 0
    local_times: dict = field(default_factory=lambda: {0: 1})
    max: int = 0
    min: int = 0

    @property
    def range(self) -> int:
        return self.max - self.min + 1


def step(state: WalkState, law: CookieLaw, seed: SeedSpec, noise_salt: int = 0) -> WalkState:
    """Advance one step; bit-identical to the compiled kernel for the same seed."""
    z = state.position
    visit = state.local_times[z]
    if visit <= law.M:
        p = sample_stack(law, seed, z).probs[visit - 1]
    else:
        p = 0.5
    u = uniform_at(seed.key(noise_tag(noise_salt)), np.int64(z), np.int64(visit))
    nxt = z + 1 if u < p else z - 1
    lts = dict(state.local_times)
    lts[nxt] = lts.get(nxt, 0) + 1
    return WalkState(nxt, state.time + 1, lts, max(state.max, nxt), min(state.min, nxt))


@dataclass
class WalkRun:
    """One trajectory ``X_0..X_n`` with the conditional drifts
    ``E(Delta_k | F_k)`` used at each step."""

    positions: np.ndarray
    drifts: np.ndarray
    M: int
    delta: float
    seed: SeedSpec | None = None

    @property
    def n(self) -> int:
        return len(self.positions) - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.positions)

    @property
    def drift_part(self) -> np.ndarray:
        """C_k as floats (rounded view of :meth:`exact_decomposition`)."""
        return np.concatenate(([0.0], np.cumsum(self.drifts)))

    @property
    def martingale_part(self) -> np.ndarray:
        return self.positions - self.drift_part

    @property
    def running_max(self) -> np.ndarray:
        return np.maximum.accumulate(self.positions)

    @property
    def running_min(self) -> np.ndarray:
        return np.minimum.accumulate(self.positions)

    @property
    def ranges(self) -> np.ndarray:
        return self.running_max - self.running_min + 1

    def exact_decomposition(self):
        """``(B, C, Q)`` as object arrays of Python ints scaled by the common
        dyadic denominator ``Q``; ``B`` is summed from its own increments so
        ``X*Q == B + C`` is a real check, not a rearrangement."""
        vals, inv = np.unique(self.drifts, return_inverse=True)
        fr = [Fraction(float(v)) for v in vals]
        Q = 1
        for f in fr:
            Q = max(Q, f.denominator)
        nums = np.array([f.numerator * (Q // f.denominator) for f in fr] + [0], dtype=object)
        dnum = nums[inv.ravel()] if len(self.drifts) else np.array([], dtype=object)
        c = np.concatenate((np.array([0], dtype=object), np.cumsum(dnum)))
        inc = self.increments.astype(object) * Q - dnum
        b = np.concatenate((np.array([0], dtype=object), np.cumsum(inc)))
        return b, c, Q

    def decomposition_holds(self) -> bool:
        b, c, Q = self.exact_decomposition()
        return bool(np.all(self.positions.astype(object) * Q == b + c))

    def hitting_time(self, x: int):
        idx = np.flatnonzero(self.positions == x)
        return int(idx[0]) if idx.size else None

    def hitting_times(self) -> dict:
        """First hitting time of every visited site."""
        vals, first = np.unique(self.positions, return_index=True)
        return dict(zip(vals.tolist(), first.tolist()))

    def local_times(self, tau: int | None = None) -> dict:
        tau = self.n if tau is None else tau
        vals, counts = np.unique(self.positions[: tau + 1], return_counts=True)
        return dict(zip(vals.tolist(), counts.tolist()))

    def to_csv(self, path) -> None:
        """Step-indexed trajectory dump: ``k, X_k, C_k``."""
        k = np.arange(self.n + 1)
        np.savetxt(path, np.column_stack([k, self.positions, self.drift_part]), delimiter=",",
                   header="k,x,c", comments="", fmt=["%d", "%d", "%.17g"])

    def state(self, tau: int | None = None) -> WalkState:
        tau = self.n if tau is None else tau
        seg = self.positions[: tau + 1]
        return WalkState(int(seg[-1]), tau, self.local_times(tau), int(seg.max()), int(seg.min()))


def _run(law, seed, n, target, noise_salt):
    pos = np.empty(n + 1, dtype=np.int64)
    dr = np.empty(n, dtype=np.float64)
    ist, _ = _single(law, seed, n, target, noise_salt, pos, dr)
    t = int(ist[_T])
    return WalkRun(pos[: t + 1].copy(), dr[:t].copy(), law.M, law_delta(law), seed), bool(ist[_HIT])


def run_fixed(law: CookieLaw, seed: SeedSpec, n: int, noise_salt: int = 0) -> WalkRun:
    """Trajectory of length ``n`` from the origin."""
    if n < 1:
        raise ValueError("horizon n must be >= 1")
    return _run(law, seed, n, 0, noise_salt)[0]


def run_until_hit(law: CookieLaw, seed: SeedSpec, x: int, cap: int, noise_salt: int = 0) -> WalkRun:
    """Trajectory stopped at ``T_x``; raises :class:`Timeout` past ``cap`` steps."""
    _check_target(x, cap)
    run, hit = _run(law, seed, cap, x, noise_salt)
    if not hit:
        raise Timeout(x, cap, int(run.positions[-1]))
    return run


def run_to_hit(law: CookieLaw, seed: SeedSpec, x: int, cap: int, noise_salt: int = 0) -> int:
    """First hitting time ``T_x``; raises :class:`Timeout` past ``cap`` steps."""
    _check_target(x, cap)
    ist, _ = _single(law, seed, cap, x, noise_salt, _empty_i64(), np.empty(0))
    if not ist[_HIT]:
        raise Timeout(x, cap, int(ist[_X]))
    return int(ist[_T])


def run_to_return(law: CookieLaw, seed: SeedSpec, cap: int, noise_salt: int = 0) -> int:
    """First return time to the origin; raises :class:`Timeout` past ``cap``."""
    ist, _ = _single(law, seed, cap, RETURN_TO_ORIGIN, noise_salt, _empty_i64(), np.empty(0))
    if not ist[_HIT]:
        raise Timeout(0, cap, int(ist[_X]))
    return int(ist[_T])


def _check_target(x, cap):
    if x == 0:
        raise ValueError("target must be nonzero")
    if cap < abs(x):
        raise ValueError(f"cap {cap} cannot reach target {x}")


def downcrossings(run: WalkRun, n: int) -> np.ndarray:
    """``D_{n,k}`` for ``k = n, n-1, ..., I_{T_n}``: entry ``i`` is ``D_{n,n-i}``.

    Counts jumps ``k -> k-1`` before ``T_n``.
    """
    tn = run.hitting_time(n)
    if tn is None or n < 1:
        raise MissingHit(f"run never hits {n}")
    pos = run.positions[: tn + 1]
    lo = int(pos.min())
    down_from = pos[:-1][np.diff(pos) < 0]
    counts = np.bincount(n - down_from, minlength=n - lo + 1)
    return counts[: n - lo + 1]


# ---------------------------------------------------------------------------
# batches

@dataclass
class WalkBatch:
    """Per-replica summaries from :func:`simulate_batch`."""

    streams: np.ndarray
    steps: np.ndarray
    final: np.ndarray
    max: np.ndarray
    min: np.ndarray
    backtrack: np.ndarray
    drift_gap: np.ndarray
    sumsq_drift: np.ndarray
    drift: np.ndarray
    hit: np.ndarray
    eat: np.ndarray
    checkpoint_times: np.ndarray
    checkpoints: np.ndarray
    down: np.ndarray
    maxhit: np.ndarray

    @property
    def range(self) -> np.ndarray:
        return self.max - self.min + 1

    def to_csv(self, path) -> None:
        """One record per run: stream, steps, X, S, I, hit flag, max backtrack."""
        data = np.column_stack([self.streams, self.steps, self.final, self.max, self.min,
                                self.hit.astype(np.int64), self.backtrack])
        np.savetxt(path, data, fmt="%d", delimiter=",", comments="",
                   header="stream,n,x,max,min,hit,backtrack")


def simulate_batch(law: CookieLaw, master: int, streams, max_steps: int, *,
                   target: int = 0, checkpoints=(), down_sites: int = 0,
                   maxhit_levels: int = 0, eat: tuple[int, int] | None = None,
                   noise_salt: int = 0, workers: int = 1) -> WalkBatch:
    """Run one walk per stream id and collect summaries.

    A walk stops after ``max_steps`` or on reaching ``target`` (0 means no
    target; :data:`RETURN_TO_ORIGIN` stops at the first return to 0).
    ``checkpoints``: times at which ``X_t`` is stored. ``down_sites``: store
    downcrossing counts from sites ``0..down_sites-1``. ``maxhit_levels``:
    store the first time ``S`` reaches each level below it. ``eat``: count
    sites in ``[a, b]`` visited fewer than ``M`` times at the stopping time.
    Results do not depend on ``workers``.
    """
    streams = np.asarray(streams, dtype=np.int64)
    R = len(streams)
    cp = np.asarray(sorted(checkpoints), dtype=np.int64)
    if cp.size and (cp[0] < 0 or cp[-1] > max_steps):
        raise ValueError("checkpoints must lie in [0, max_steps]")
    env_keys = stream_keys(master, streams, TAG_ENV)
    noise_keys = stream_keys(master, streams, noise_tag(noise_salt))
    out = WalkBatch(
        streams=streams,
        steps=np.zeros(R, np.int64), final=np.zeros(R, np.int64),
        max=np.zeros(R, np.int64), min=np.zeros(R, np.int64),
        backtrack=np.zeros(R, np.int64), drift_gap=np.zeros(R),
        sumsq_drift=np.zeros(R), drift=np.zeros(R), hit=np.zeros(R, np.bool_),
        eat=np.zeros(R, np.int64), checkpoint_times=cp,
        checkpoints=np.zeros((R, cp.size), np.int64),
        down=np.zeros((R, down_sites), np.int64),
        maxhit=np.full((R, maxhit_levels), -1, np.int64),
    )
    lo, hi = eat if eat is not None else (0, -1)
    probs, cum, dl = law.prob_table, law.cum_weights, law_delta(law)

    def work(sl):
        lt, atom = _buffers(max_steps)
        _walk_batch(probs, cum, env_keys[sl], noise_keys[sl], max_steps, target, dl,
                    cp, lo, hi, lt, atom, out.steps[sl], out.final[sl], out.max[sl], out.min[sl],
                    out.backtrack[sl], out.drift_gap[sl], out.sumsq_drift[sl],
                    out.drift[sl], out.hit[sl], out.eat[sl], out.checkpoints[sl],
                    out.down[sl], out.maxhit[sl])

    _parallel(work, R, workers)
    return out


def _parallel(work, total, workers):
    workers = max(1, min(int(workers), total)) if total else 1
    bounds = np.linspace(0, total, workers + 1).astype(int)
    slices = [slice(bounds[i], bounds[i + 1]) for i in range(workers)]
    if workers == 1:
        work(slices[0])
        return
    with ThreadPoolExecutor(workers) as ex:
        list(ex.map(work, slices))


# ---------------------------------------------------------------------------
# exact averaged law for small horizons

@dataclass
class ExactPmf:
    n: int
    pmf: dict

    def __getitem__(self, x):
        return self.pmf.get(x, 0.0)

    def total(self) -> float:
        return math.fsum(self.pmf.values())


def exact_pmf(law: CookieLaw, n: int) -> ExactPmf:
    """Averaged law of ``X_n`` by enumerating all ``2^n`` paths.

    Under i.i.d. sites the averaged probability of a path factors into one
    term per visited site: the law-expectation of the product of that site's
    cookie probabilities along the path's decisions there.
    """
    if n > EXACT_PMF_MAX_N:
        raise HorizonTooLarge(f"n={n} exceeds {EXACT_PMF_MAX_N}")
    if n < 0:
        raise ValueError("n must be >= 0")
    probs = law.prob_table
    w = np.array(law.weights)
    M = law.M
    pmf: dict[int, float] = {}

    # per-site vector of products over atoms, plus visit count
    site_prod: dict[int, np.ndarray] = {}
    site_visits: dict[int, int] = {}

    def rec(x, t, fair_factor):
        if t == n:
            p = fair_factor
            for prod in site_prod.values():
                p *= float(w @ prod)
            pmf[x] = pmf.get(x, 0.0) + p
            return
        v = site_visits.get(x, 0) + 1
        site_visits[x] = v
        for right in (True, False):
            if v <= M:
                prev = site_prod.get(x)
                col = probs[:, v - 1] if right else 1.0 - probs[:, v - 1]
                site_prod[x] = col.copy() if prev is None else prev * col
                rec(x + 1 if right else x - 1, t + 1, fair_factor)
                if prev is None:
                    del site_prod[x]
                else:
                    site_prod[x] = prev
            else:
                rec(x + 1 if right else x - 1, t + 1, fair_factor * 0.5)
        if v == 1:
            del site_visits[x]
        else:
            site_visits[x] = v - 1

    rec(0, 0, 1.0)
    return ExactPmf(n, dict(sorted(pmf.items())))


def exact_pmf_bruteforce(law: CookieLaw, n: int) -> ExactPmf:
    """Slow oracle: enumerate environments atom-by-site as well as paths."""
    if len(law.weights) ** (2 * n + 1) * 2 ** n > 5_000_000:
        raise HorizonTooLarge("brute-force enumeration too large")
    sites = range(-n, n + 1)
    pmf: dict[int, float] = {}
    for atoms in itertools.product(range(len(law.weights)), repeat=len(sites)):
        wenv = math.prod(law.weights[a] for a in atoms)
        env = dict(zip(sites, atoms))
        for path in itertools.product((1, -1), repeat=n):
            x, p, visits = 0, wenv, {}
            for s in path:
                v = visits.get(x, 0) + 1
                visits[x] = v
                om = law.stacks[env[x]].probs[v - 1] if v <= law.M else 0.5
                p *= om if s == 1 else 1.0 - om
                x += s
            pmf[x] = pmf.get(x, 0.0) + p
    return ExactPmf(n, dict(sorted(pmf.items())))
