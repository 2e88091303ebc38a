"""Reference continuous processes on grids.

Brownian motion, the (alpha, beta)-perturbed Brownian motion
``X = B + alpha * sup X + beta * inf X``, running maxima, and the
index-1/2 stable subordinator of Brownian first-passage times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .rng import TAG_BM, TAG_SUBORD, SeedSpec, next_normal, stream_keys


class InvalidParams(ValueError):
    pass


KINDS = ("BM", "PBM", "RUNMAX", "SUBORDINATOR")


@dataclass
class GridPath:
    """Path sampled on a grid. ``dt`` is set for uniform time grids; the
    subordinator is indexed by levels in ``grid`` instead."""

    dt: float | None
    values: np.ndarray
    kind: str
    grid: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}")

    @property
    def times(self) -> np.ndarray:
        if self.grid is not None:
            return self.grid
        return np.arange(len(self.values)) * self.dt

    def coarsen(self, factor: int) -> "GridPath":
        """Every ``factor``-th point; Brownian increments of the coarse path
        are sums of the fine ones."""
        return GridPath(self.dt * factor, self.values[::factor].copy(), self.kind)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.times, self.values]), delimiter=",",
                   header="t,value", comments="", fmt="%.17g")


@dataclass(frozen=True)
class PbmParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha < 1 and self.beta < 1):
            raise InvalidParams(f"need alpha < 1 and beta < 1, got ({self.alpha}, {self.beta})")

    @classmethod
    def from_delta(cls, delta: float) -> "PbmParams":
        return cls(delta, -delta)


def _steps(dt, horizon):
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(round(horizon / dt))
    if n < 1:
        raise ValueError("horizon shorter than one grid step")
    return n


@nb.njit(cache=True, nogil=True)
def _bm_values(key, n, sdt, out):
    ctr = np.zeros(1, dtype=np.uint64)
    out[0] = 0.0
    acc = 0.0
    for k in range(1, n + 1):
        acc += sdt * next_normal(key, ctr)
        out[k] = acc


def sample_bm(dt: float, horizon: float, seed: SeedSpec) -> GridPath:
    """Standard Brownian motion on ``0, dt, ..., horizon``."""
    n = _steps(dt, horizon)
    out = np.empty(n + 1)
    _bm_values(seed.key(TAG_BM), n, np.sqrt(dt), out)
    return GridPath(dt, out, "BM")


@nb.njit(inline="always", cache=True)
def _pbm_point(b, hi, lo, alpha, beta):
    # unique root of x - b - alpha*max(hi, x) - beta*min(lo, x); the
    # left side is strictly increasing when alpha, beta < 1
    x = b + (alpha * hi + beta * lo)
    if x > hi:
        return (b + beta * lo) / (1.0 - alpha)
    if x < lo:
        return (b + alpha * hi) / (1.0 - beta)
    return x


@nb.njit(cache=True, nogil=True)
def _solve(bvals, alpha, beta, out):
    hi = 0.0
    lo = 0.0
    out[0] = 0.0
    for k in range(1, bvals.shape[0]):
        x = _pbm_point(bvals[k], hi, lo, alpha, beta)
        out[k] = x
        if x > hi:
            hi = x
        elif x < lo:
            lo = x


def solve_pbm(b: GridPath, params: PbmParams) -> GridPath:
    """Perturbed Brownian motion driven by the grid path ``b``."""
    if not isinstance(params, PbmParams):
        params = PbmParams(*params)
    vals = np.asarray(b.values, dtype=np.float64)
    if vals[0] != 0.0:
        raise ValueError("driving path must start at 0")
    out = np.empty_like(vals)
    _solve(vals, float(params.alpha), float(params.beta), out)
    return GridPath(b.dt, out, "PBM")


def pbm_residual(x: GridPath, b: GridPath, params: PbmParams) -> float:
    """Max over the grid of ``|X - B - alpha*max X - beta*min X|``."""
    xv = x.values
    r = xv - b.values - params.alpha * np.maximum.accumulate(xv) - params.beta * np.minimum.accumulate(xv)
    return float(np.max(np.abs(r)))


@nb.njit(cache=True, nogil=True)
def _pbm_batch(keys, n, sdt, alpha, beta, final, hi_out, lo_out, bfinal):
    for r in range(keys.shape[0]):
        ctr = np.zeros(1, dtype=np.uint64)
        acc = 0.0
        hi = 0.0
        lo = 0.0
        x = 0.0
        for k in range(n):
            acc += sdt * next_normal(keys[r], ctr)
            x = _pbm_point(acc, hi, lo, alpha, beta)
            if x > hi:
                hi = x
            elif x < lo:
                lo = x
        final[r] = x
        hi_out[r] = hi
        lo_out[r] = lo
        bfinal[r] = acc


@dataclass
class PbmBatch:
    final: np.ndarray
    max: np.ndarray
    min: np.ndarray
    driver_final: np.ndarray


def pbm_batch(params: PbmParams, dt: float, horizon: float, master: int, streams,
              workers: int = 1) -> PbmBatch:
    """Endpoint, max and min of one path per stream, without storing paths.

    Same numbers as ``solve_pbm(sample_bm(dt, horizon, SeedSpec(master, s)))``.
    """
    from .walk import _parallel

    n = _steps(dt, horizon)
    keys = stream_keys(master, streams, TAG_BM)
    R = len(keys)
    out = PbmBatch(np.empty(R), np.empty(R), np.empty(R), np.empty(R))
    a, b, sdt = float(params.alpha), float(params.beta), float(np.sqrt(dt))
    _parallel(lambda sl: _pbm_batch(keys[sl], n, sdt, a, b, out.final[sl], out.max[sl],
                                    out.min[sl], out.driver_final[sl]), R, workers)
    return out


def running_max(path: GridPath) -> GridPath:
    return GridPath(path.dt, np.maximum.accumulate(path.values), "RUNMAX", path.grid)


@nb.njit(cache=True, nogil=True)
def _subordinator(key, levels, out):
    ctr = np.zeros(1, dtype=np.uint64)
    acc = 0.0
    prev = 0.0
    for i in range(levels.shape[0]):
        dx = levels[i] - prev
        if dx > 0.0:
            z = next_normal(key, ctr)
            acc += dx * dx / (z * z)
        out[i] = acc
        prev = levels[i]


def sample_subordinator(levels, seed: SeedSpec) -> GridPath:
    """First-passage process ``H(x) = inf{t : B(t) = x}`` at the given levels.

    Independent increments ``(dx)^2 / Z^2``; ``H(0) = 0``.
    """
    lv = np.asarray(levels, dtype=np.float64)
    if lv.ndim != 1 or lv.size == 0:
        raise ValueError("levels must be a nonempty 1-d sequence")
    if lv[0] < 0 or np.any(np.diff(lv) <= 0):
        raise ValueError("levels must be strictly increasing and start at >= 0")
    out = np.empty_like(lv)
    _subordinator(seed.key(TAG_SUBORD), lv, out)
    return GridPath(None, out, "SUBORDINATOR", lv.copy())


def subordinator_samples(level: float, master: int, streams) -> np.ndarray:
    """``H(level)`` for each stream id."""
    return _sub_batch(stream_keys(master, streams, TAG_SUBORD), float(level))


@nb.njit(cache=True)
def _sub_batch(keys, level):
    out = np.empty(keys.shape[0])
    lv = np.array([level])
    tmp = np.empty(1)
    for r in range(keys.shape[0]):
        _subordinator(keys[r], lv, tmp)
        out[r] = tmp[0]
    return out


def coarsened_endpoints(params: PbmParams, dts, master: int, streams) -> dict:
    """Solve on nested grids driven by one fine Brownian path per stream.

    Coarse grids take every k-th point of the finest path, so their
    increments are sums of fine increments. Also reports the largest
    fixed-point residual and whether the mirror identity
    ``-X_{a,b}(-B) == X_{b,a}(B)`` holds bitwise on every grid.
    """
    dts = sorted(float(d) for d in dts)[::-1]
    finest = dts[-1]
    factors = [int(round(d / finest)) for d in dts]
    if any(abs(f * finest - d) > 1e-9 * d for f, d in zip(factors, dts)):
        raise ValueError("grid steps must be integer multiples of the finest one")
    swapped = PbmParams(params.beta, params.alpha)
    streams = np.asarray(streams, dtype=np.int64)
    final = np.empty((len(streams), len(dts)))
    worst = 0.0
    symmetric = True
    for r, s in enumerate(streams):
        fine = sample_bm(finest, 1.0, SeedSpec(master, int(s)))
        for j, f in enumerate(factors):
            b = fine.coarsen(f) if f > 1 else fine
            x = solve_pbm(b, params)
            final[r, j] = x.values[-1]
            worst = max(worst, pbm_residual(x, b, params))
            neg = solve_pbm(GridPath(b.dt, -b.values, "BM"), swapped)
            symmetric &= bool(np.array_equal(-neg.values, x.values))
    return {"dt": dts, "final": final, "residual": worst, "symmetric": symmetric}
