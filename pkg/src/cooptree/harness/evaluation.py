"""ROC curves and power estimates for two-sample statistics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..baselines import EpsilonGibbsConfig, epsilon_gibbs, ks_statistic
from ..coopt import CooptParams, coupling_statistic
from ..numerics import RandomStream
from ..space import TABLE, Dataset
from .scenarios import ScenarioSpec, generate_scenario


@dataclass(frozen=True)
class Statistic:
    """A named two-sample statistic.

    ``larger_means_different`` fixes the orientation; scores passed to the
    ROC are ``value`` or ``-value`` so that larger always means "different".
    """

    name: str
    fn: Callable[[Dataset, Dataset], float]
    larger_means_different: bool

    def __call__(self, d1: Dataset, d2: Dataset) -> float:
        return float(self.fn(d1, d2))

    def score(self, value: float) -> float:
        return value if self.larger_means_different else -value


def coopt_statistic(params: CooptParams | None = None) -> Statistic:
    params = params or CooptParams()
    return Statistic("coopt", lambda a, b: coupling_statistic(a, b, params), False)


def ks_stat() -> Statistic:
    def fn(a: Dataset, b: Dataset):
        if a.space.dims != 1 or a.space.kind == TABLE:
            raise ValueError("the KS statistic needs 1-d continuous samples")
        return ks_statistic(a.points[:, 0], b.points[:, 0])

    return Statistic("ks", fn, True)


def epsilon_statistic(cfg: EpsilonGibbsConfig | None = None) -> Statistic:
    cfg = cfg or EpsilonGibbsConfig()
    return Statistic("epsilon", lambda a, b: epsilon_gibbs(a, b, cfg).mean, False)


def make_statistic(name: str, params: CooptParams | None = None, gibbs: EpsilonGibbsConfig | None = None) -> Statistic:
    if name == "coopt":
        return coopt_statistic(params)
    if name == "ks":
        return ks_stat()
    if name == "epsilon":
        return epsilon_statistic(gibbs)
    raise ValueError(f"unknown statistic {name!r}; expected coopt, ks or epsilon")


@dataclass(frozen=True)
class RocResult:
    statistic: str
    null_values: np.ndarray
    alt_values: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    power: float | None = None
    level: float | None = None

    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_curve(null_scores, alt_scores) -> tuple[np.ndarray, np.ndarray]:
    """ROC points from a threshold sweep; larger scores flag the alternative.

    A threshold is placed at every distinct pooled value, so a block of tied
    scores moves the curve diagonally.
    """
    s0 = np.asarray(null_scores, dtype=float)
    s1 = np.asarray(alt_scores, dtype=float)
    thr = np.unique(np.concatenate([s0, s1]))[::-1]
    s0_sorted = np.sort(s0)
    s1_sorted = np.sort(s1)
    fp = len(s0) - np.searchsorted(s0_sorted, thr, side="left")
    tp = len(s1) - np.searchsorted(s1_sorted, thr, side="left")
    fpr = np.concatenate([[0.0], fp / len(s0)])
    tpr = np.concatenate([[0.0], tp / len(s1)])
    return fpr, tpr


def auc_from_curve(fpr, tpr) -> float:
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def _replicates(stat: Statistic, spec: ScenarioSpec, n1, n2, reps, stream: RandomStream, workers):
    def one(r):
        d1, d2 = generate_scenario(spec, n1, n2, stream.child(r))
        return stat.score(stat(d1, d2))

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(one, range(reps))))
    return np.array([one(r) for r in range(reps)])


def _stream(rng) -> RandomStream:
    if isinstance(rng, RandomStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RandomStream(int(rng))
    raise TypeError("expected a RandomStream or an integer seed")


def simulate_scores(stat: Statistic, spec: ScenarioSpec, n1, n2, reps, rng, workers=None):
    """Oriented scores under the null variant and under the alternative.

    Replicate ``r`` of the null uses the sub-stream ``(0, r)``, of the
    alternative ``(1, r)``.
    """
    if reps < 2:
        raise ValueError("reps must be at least 2")
    s = _stream(rng)
    null = _replicates(stat, spec.null_variant(), n1, n2, reps, s.child(0), workers)
    alt = _replicates(stat, spec, n1, n2, reps, s.child(1), workers)
    return null, alt


def roc(stat: Statistic, spec: ScenarioSpec, n1, n2, reps: int, rng, workers=None) -> RocResult:
    null, alt = simulate_scores(stat, spec, n1, n2, reps, rng, workers)
    fpr, tpr = roc_curve(null, alt)
    return RocResult(stat.name, null, alt, fpr, tpr, auc_from_curve(fpr, tpr))


def critical_value(null_scores, level: float) -> float:
    """Rejection threshold: reject when a score is strictly above it."""
    if not 0.0 < level <= 1.0:
        raise ValueError("level must lie in (0, 1]")
    s = np.sort(np.asarray(null_scores, dtype=float))[::-1]
    k = int(np.floor(level * len(s) + 1e-9))
    return -np.inf if k >= len(s) else float(s[k])


def power_from_scores(null_scores, alt_scores, level: float) -> float:
    c = critical_value(null_scores, level)
    return float(np.mean(np.asarray(alt_scores) > c))


def power_at_level(stat: Statistic, spec: ScenarioSpec, n1, n2, level: float, reps: int, rng, workers=None) -> float:
    """Fraction of alternative replicates beyond the null's level-critical value."""
    if not 0.0 < level <= 1.0:
        raise ValueError("level must lie in (0, 1]")
    null, alt = simulate_scores(stat, spec, n1, n2, reps, rng, workers)
    return power_from_scores(null, alt, level)
