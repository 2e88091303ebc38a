"""Empirical CDFs, Kolmogorov-Smirnov distances, quantiles and normal oracles."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import special


class EmptySample(ValueError):
    pass


class OutOfRange(ValueError):
    pass


def normal_cdf(x):
    """Standard normal CDF (erfc based; relative error near machine precision)."""
    return special.ndtr(x)


def half_normal_cdf(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, 2.0 * special.ndtr(x) - 1.0, 0.0)


def normal_quantile(p):
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any((p_arr <= 0) | (p_arr >= 1)):
        raise OutOfRange(f"probability {p} outside (0, 1)")
    out = special.ndtri(p_arr)
    return float(out) if np.ndim(out) == 0 else out


def inverse_gaussian_square_quantile(p):
    """Quantile of ``1/Z^2`` for standard normal ``Z`` (law of Brownian
    first passage to level 1)."""
    return 1.0 / normal_quantile(1.0 - np.asarray(p) / 2.0) ** 2


def first_passage_survival(t, level=1.0):
    """``P(H(level) > t) = 2 Phi(level / sqrt t) - 1``."""
    t = np.asarray(t, dtype=np.float64)
    return 2.0 * special.ndtr(level / np.sqrt(t)) - 1.0


def quantile(samples, q):
    """Type-7 (linear interpolation) sample quantile."""
    q_arr = np.asarray(q, dtype=np.float64)
    if np.any((q_arr <= 0) | (q_arr >= 1)):
        raise OutOfRange(f"quantile level {q} outside (0, 1)")
    a = np.asarray(samples, dtype=np.float64)
    if a.size == 0:
        raise EmptySample("quantile of an empty sample")
    return np.quantile(a, q_arr, method="linear")


class Ecdf:
    """Right-continuous empirical distribution function."""

    def __init__(self, samples):
        a = np.sort(np.asarray(samples, dtype=np.float64).ravel())
        if a.size == 0:
            raise EmptySample("ECDF of an empty sample")
        self.values = a
        self.size = a.size

    def __call__(self, x):
        return np.searchsorted(self.values, x, side="right") / self.size

    def points(self):
        """Unique jump locations and the ECDF value there, for plotting."""
        u, idx = np.unique(self.values, return_index=True)
        counts = np.diff(np.append(idx, self.size))
        return u, np.cumsum(counts) / self.size


@dataclass
class KsResult:
    statistic: float
    sizes: tuple
    pvalue: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        return d


def ks_two_sample(a, b) -> KsResult:
    """Sup distance between two ECDFs over the pooled support."""
    fa, fb = Ecdf(a), Ecdf(b)
    pooled = np.concatenate([fa.values, fb.values])
    d = float(np.max(np.abs(fa(pooled) - fb(pooled))))
    en = fa.size * fb.size / (fa.size + fb.size)
    return KsResult(d, (fa.size, fb.size), float(special.kolmogorov(math.sqrt(en) * d)))


def ks_one_sample(a, cdf="normal") -> KsResult:
    """Sup distance between the ECDF of ``a`` and a reference CDF.

    ``cdf`` is ``"normal"``, ``"half_normal"``, a callable, or a table
    ``(x, F)`` interpolated linearly.
    """
    x = np.sort(np.asarray(a, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise EmptySample("KS of an empty sample")
    if isinstance(cdf, str):
        ref = {"normal": normal_cdf, "half_normal": half_normal_cdf}[cdf.lower()]
    elif callable(cdf):
        ref = cdf
    else:
        tx, tf = (np.asarray(v, dtype=np.float64) for v in cdf)
        ref = lambda v: np.interp(v, tx, tf, left=0.0, right=1.0)  # noqa: E731
    F = np.asarray(ref(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    return KsResult(d, (n,), float(special.kolmogorov(math.sqrt(n) * d)))


def proportion_stderr(p, n):
    return np.sqrt(np.asarray(p) * (1 - np.asarray(p)) / n)


def mean_stderr(samples):
    a = np.asarray(samples, dtype=np.float64)
    return float(a.std(ddof=1) / math.sqrt(a.size))


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def read_values(path) -> np.ndarray:
    """One value per line; blank lines and ``#`` comments ignored."""
    return np.loadtxt(path, dtype=np.float64, comments="#", ndmin=1)


def write_values(path, values) -> None:
    np.savetxt(path, np.asarray(values).ravel(), fmt="%.17g")


def write_ks(path, result: KsResult) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n")
