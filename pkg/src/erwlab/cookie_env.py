"""Cookie environments with finitely supported i.i.d. site laws.

A site carries a stack of ``M`` cookies; the i-th visit to the site steps
right with probability ``probs[i-1]`` and every visit past the M-th is fair.
A :class:`CookieLaw` is a finite mixture of stacks. Stacks for distinct sites
are drawn independently, lazily, from the counter-based stream keyed by
``(seed, site)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from .rng import TAG_ENV, SeedSpec, uniform_at

WEIGHT_TOL = 1e-12


class LawError(ValueError):
    pass


class DegenerateLaw(LawError):
    """One of the non-degeneracy expectations is zero."""


class BadWeights(LawError):
    """Weights are not positive or do not sum to one."""


@dataclass(frozen=True)
class CookieStack:
    probs: tuple[float, ...]
    # the stack this one mirrors; keeps mirror an exact involution even
    # though 1 - (1 - p) need not round back to p
    twin: "CookieStack | None" = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if not probs:
            raise LawError("a cookie stack needs at least one cookie")
        for p in probs:
            if not (0.0 <= p <= 1.0):
                raise LawError(f"cookie probability {p} outside [0, 1]")
        object.__setattr__(self, "probs", probs)

    @property
    def M(self) -> int:
        return len(self.probs)

    def drift(self) -> float:
        if self.twin is not None:
            return -self.twin.drift()
        return math.fsum(2.0 * p - 1.0 for p in self.probs)

    def mirrored(self) -> "CookieStack":
        if self.twin is not None:
            return self.twin
        return CookieStack(tuple(1.0 - p for p in self.probs), twin=self)


@dataclass(frozen=True)
class CookieLaw:
    """Finite mixture of cookie stacks. Construct through :func:`validate`
    or :meth:`from_dict` to get the non-degeneracy check."""

    M: int
    stacks: tuple[CookieStack, ...]
    weights: tuple[float, ...]
    name: str = ""

    def __post_init__(self):
        if self.M < 1:
            raise LawError("M must be a positive integer")
        if len(self.stacks) != len(self.weights) or not self.stacks:
            raise BadWeights("support and weights must be nonempty and aligned")
        for s in self.stacks:
            if s.M != self.M:
                raise LawError(f"stack {s.probs} has length {s.M}, expected M={self.M}")
        w = tuple(float(x) for x in self.weights)
        if any(not (x > 0.0) or not math.isfinite(x) for x in w):
            raise BadWeights(f"weights must be positive, got {w}")
        if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
            raise BadWeights(f"weights sum to {math.fsum(w)!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def single(cls, *probs: float, name: str = "") -> "CookieLaw":
        """Degenerate law: every site carries the same stack."""
        return cls(len(probs), (CookieStack(probs),), (1.0,), name)

    @classmethod
    def from_dict(cls, data: dict, name: str = "") -> "CookieLaw":
        try:
            M = int(data["M"])
            support = data["support"]
            stacks = tuple(CookieStack(tuple(a["probs"])) for a in support)
            weights = tuple(float(a["weight"]) for a in support)
        except (KeyError, TypeError) as exc:
            raise LawError(f"malformed law definition: {exc}") from None
        return validate(cls(M, stacks, weights, name or data.get("name", "")))

    def to_dict(self) -> dict:
        d = {
            "M": self.M,
            "support": [
                {"probs": list(s.probs), "weight": w}
                for s, w in zip(self.stacks, self.weights)
            ],
        }
        if self.name:
            d["name"] = self.name
        return d

    # arrays consumed by the numba kernels
    @property
    def prob_table(self) -> np.ndarray:
        return np.array([s.probs for s in self.stacks], dtype=np.float64)

    @property
    def cum_weights(self) -> np.ndarray:
        c = np.cumsum(np.array(self.weights, dtype=np.float64))
        c[-1] = 1.0
        return c

    def a2_expectations(self) -> tuple[float, float]:
        right = math.fsum(w * math.prod(s.probs) for s, w in zip(self.stacks, self.weights))
        left = math.fsum(
            w * math.prod(1.0 - p for p in s.probs) for s, w in zip(self.stacks, self.weights)
        )
        return right, left

    def is_all_fair(self) -> bool:
        return all(p == 0.5 for s in self.stacks for p in s.probs)


def validate(law: CookieLaw) -> CookieLaw:
    """Return ``law`` if it satisfies non-degeneracy, else raise.

    Positivity is strict with no tolerance: only cookies equal to 0 or 1 can
    make a product vanish.
    """
    if abs(math.fsum(law.weights) - 1.0) > WEIGHT_TOL or any(w <= 0 for w in law.weights):
        raise BadWeights(f"invalid weights {law.weights}")
    right, left = law.a2_expectations()
    if not right > 0.0:
        raise DegenerateLaw(f"E[prod w(i)] = {right} (walk can never take M right steps in a row)")
    if not left > 0.0:
        raise DegenerateLaw(f"E[prod (1-w(i))] = {left} (walk can never take M left steps in a row)")
    return law


def delta(law: CookieLaw) -> float:
    """Expected total drift per site, E sum_i (2 w(i) - 1)."""
    return math.fsum(w * s.drift() for s, w in zip(law.stacks, law.weights))


def mirror(law: CookieLaw) -> CookieLaw:
    """Swap left and right: w(i) -> 1 - w(i) at every cookie."""
    name = f"mirror({law.name})" if law.name else ""
    return CookieLaw(law.M, tuple(s.mirrored() for s in law.stacks), law.weights, name)


def pad_fair(law: CookieLaw, extra: int = 1) -> CookieLaw:
    """Append ``extra`` fair cookies to every stack. The walk law is unchanged."""
    stacks = tuple(CookieStack(s.probs + (0.5,) * extra) for s in law.stacks)
    return CookieLaw(law.M + extra, stacks, law.weights, law.name)


@nb.njit(inline="always", cache=True)
def pick_atom(cum, u):
    k = 0
    n = cum.shape[0]
    while k < n - 1 and u >= cum[k]:
        k += 1
    return k


@nb.njit(cache=True)
def atom_at_site(cum, env_key, site):
    return pick_atom(cum, uniform_at(env_key, site, 0))


def stack_index(law: CookieLaw, seed: SeedSpec, site: int) -> int:
    return int(atom_at_site(law.cum_weights, seed.key(TAG_ENV), np.int64(site)))


def sample_stack(law: CookieLaw, seed: SeedSpec, site: int) -> CookieStack:
    """Cookie stack at ``site`` in the environment of replica ``seed``."""
    return law.stacks[stack_index(law, seed, site)]


def sample_stack_indices(law: CookieLaw, seed: SeedSpec, sites) -> np.ndarray:
    return _atoms_at_sites(law.cum_weights, seed.key(TAG_ENV), np.asarray(sites, dtype=np.int64))


@nb.njit(cache=True)
def _atoms_at_sites(cum, env_key, sites):
    out = np.empty(sites.shape[0], dtype=np.int64)
    for i in range(sites.shape[0]):
        out[i] = atom_at_site(cum, env_key, sites[i])
    return out


def load_law(path) -> CookieLaw:
    path = Path(path)
    with path.open() as fh:
        data = json.load(fh)
    return CookieLaw.from_dict(data, name=data.get("name", path.stem))


def save_law(law: CookieLaw, path) -> None:
    Path(path).write_text(json.dumps(law.to_dict(), indent=2) + "\n")


# Reference laws used throughout the tests and experiments.
FAIR = CookieLaw.single(0.5, name="fair")
POSITIVE_07 = CookieLaw.single(0.7, name="m1_0.7")
MIXED_SIGNS = CookieLaw.single(0.9, 0.2, name="m2_0.9_0.2")
DELTA_HALF = CookieLaw.single(0.625, 0.625, name="delta_0.5")
DELTA_ONE = CookieLaw.single(0.75, 0.75, name="delta_1")

STANDARD_LAWS = {law.name: law for law in (FAIR, POSITIVE_07, MIXED_SIGNS, DELTA_HALF, DELTA_ONE)}
