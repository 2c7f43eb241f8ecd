"""Log-domain special functions and seeded random sampling primitives.

Everything probabilistic in the package is carried as a natural log. The
helpers here are deliberately scalar and allocation-free because they sit in
the inner loop of the partition recursions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

NEG_INF = float("-inf")
LN2 = math.log(2.0)


def log_gamma(x: float) -> float:
    """Return ``ln Gamma(x)`` for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def log_dirichlet_norm(t: Sequence[float]) -> float:
    """Log of the Dirichlet normalizer ``D(t) = prod Gamma(t_i) / Gamma(sum t_i)``.

    Parameters
    ----------
    t : sequence of float
        Strictly positive components, at least one.
    """
    if len(t) == 0:
        raise ValueError("log_dirichlet_norm requires a non-empty vector")
    total = 0.0
    acc = 0.0
    for v in t:
        if not v > 0:
            raise ValueError(f"Dirichlet parameters must be positive, got {v!r}")
        acc += math.lgamma(v)
        total += v
    return acc - math.lgamma(total)


def log_split_ratio(n_left: int, n_right: int, a_left: float, a_right: float) -> float:
    """``ln D(n + a) - ln D(a)`` for a two-child split.

    This is the Dirichlet-multinomial integral of the assignment vector for
    one sample at one split; it is the only place the pseudo-counts enter the
    marginal likelihood.
    """
    lg = math.lgamma
    return (
        lg(n_left + a_left)
        + lg(n_right + a_right)
        - lg(n_left + n_right + a_left + a_right)
        - lg(a_left)
        - lg(a_right)
        + lg(a_left + a_right)
    )


def log_sum_exp(values: Iterable[float]) -> float:
    """Stable ``ln sum exp(v)``; ``-inf`` entries are allowed."""
    vals = list(values)
    if not vals:
        raise ValueError("log_sum_exp of an empty sequence")
    m = max(vals)
    if m == NEG_INF:
        return NEG_INF
    if m == math.inf:
        return math.inf
    return m + math.log(math.fsum(math.exp(v - m) for v in vals))


def log_add(a: float, b: float) -> float:
    """Two-argument ``log_sum_exp``; exact when one side is ``-inf``."""
    if a < b:
        a, b = b, a
    if b == NEG_INF:
        return a
    return a + math.log1p(math.exp(b - a))


def safe_log(p: float) -> float:
    """``ln p`` with ``ln 0 = -inf``."""
    if p < 0:
        raise ValueError(f"negative probability {p!r}")
    return math.log(p) if p > 0 else NEG_INF


def clamp_probability(p: float) -> float:
    return 0.0 if p < 0.0 else (1.0 if p > 1.0 else p)


@dataclass(frozen=True)
class RandomStream:
    """A reproducible, hierarchically addressable source of randomness.

    A stream is identified by ``(seed, path)``.  ``child(k)`` appends ``k`` to
    the path, so sub-streams can be keyed by replicate index, draw index or
    canonical node key and stay reproducible whatever order they are visited
    in.  The numpy generator is derived through ``SeedSequence`` spawn keys,
    which makes distinct paths statistically independent.
    """

    seed: int
    path: tuple = ()

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if any((not isinstance(k, (int, np.integer))) or k < 0 for k in self.path):
            raise ValueError("stream path entries must be non-negative integers")

    def child(self, *keys: int) -> "RandomStream":
        return RandomStream(self.seed, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))


RngLike = Union[RandomStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RandomStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RandomStream or numpy Generator, got {type(rng).__name__}")


def sample_dirichlet(alpha: Sequence[float], rng: RngLike) -> np.ndarray:
    """Draw from ``Dirichlet(alpha)`` by normalizing independent Gamma draws.

    Passing a :class:`RandomStream` always restarts that stream, so repeated
    calls with the same stream return the same vector; pass a numpy
    ``Generator`` to draw successive values.
    """
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("alpha must be a non-empty vector")
    if not np.all(a > 0):
        raise ValueError("Dirichlet parameters must be positive")
    if a.size == 1:
        return np.ones(1)
    g = as_generator(rng).standard_gamma(a)
    return g / g.sum()


def sample_bernoulli(p: float, rng: RngLike) -> int:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Bernoulli probability must lie in [0, 1], got {p!r}")
    if p == 0.0:
        return 0
    if p == 1.0:
        return 1
    return int(as_generator(rng).random() < p)
