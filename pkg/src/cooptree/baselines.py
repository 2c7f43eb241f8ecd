"""Reference two-sample statistics used for comparison.

* :func:`ks_statistic`, the two-sample Kolmogorov-Smirnov distance for 1-d data;
* :func:`epsilon_gibbs`, a Gibbs sampler for the shared-component weight
  ``eps`` in the mixture model ``Q1 = eps H0 + (1 - eps) H1``,
  ``Q2 = eps H0 + (1 - eps) H2`` on a binary table, with ``H0, H1, H2``
  i.i.d. Dirichlet on the observed cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import TABLE, Dataset


def ks_statistic(x1, x2) -> float:
    """``sup_t |F1(t) - F2(t)|`` for the empirical CDFs of two samples.

    Both CDFs are evaluated right-continuously at every pooled value, so
    tied values are counted after all the jumps at that value.
    """
    a = np.sort(np.asarray(x1, dtype=float).ravel())
    b = np.sort(np.asarray(x2, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    t = np.concatenate([a, b])
    f1 = np.searchsorted(a, t, side="right") / a.size
    f2 = np.searchsorted(b, t, side="right") / b.size
    return float(np.max(np.abs(f1 - f2)))


@dataclass(frozen=True)
class EpsilonGibbsConfig:
    """Settings of the eps-Gibbs sampler.

    ``alpha_h`` is the Dirichlet pseudo-count given to every observed cell.
    """

    alpha_h: float = 0.5
    a_eps: float = 3.0
    b_eps: float = 3.0
    burn_in: int = 10_000
    kept: int = 10_000
    seed: int = 0
    check: bool = False

    def __post_init__(self):
        if not (self.alpha_h > 0 and self.a_eps > 0 and self.b_eps > 0):
            raise ValueError("alpha_h, a_eps and b_eps must be positive")
        if self.burn_in < 0 or self.kept < 1:
            raise ValueError("burn_in must be >= 0 and kept >= 1")


@dataclass
class GibbsState:
    h0: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    j1: np.ndarray
    j2: np.ndarray
    eps: float

    def check(self):
        for name in ("h0", "h1", "h2"):
            h = getattr(self, name)
            if np.any(h < 0) or abs(h.sum() - 1.0) > 1e-12:
                raise AssertionError(f"{name} left the simplex")
        if not 0.0 <= self.eps <= 1.0:
            raise AssertionError("eps left [0, 1]")


@dataclass(frozen=True)
class EpsilonGibbsResult:
    mean: float
    samples: np.ndarray
    support: np.ndarray


def shared_probability(eps: float, p_shared, p_own):
    """Full conditional ``P(J = 1)`` that an observation came from ``H0``.

    ``J = 1`` marks the shared component, whose prior rate is ``eps``.
    """
    p_shared = np.asarray(p_shared, dtype=float)
    p_own = np.asarray(p_own, dtype=float)
    num = eps * p_shared
    den = num + (1.0 - eps) * p_own
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), eps)
    return out


def _cells(data: Dataset) -> np.ndarray:
    if data.space.kind != TABLE:
        raise ValueError("the eps-Gibbs sampler works on binary tables")
    if len(data) == 0:
        return np.zeros(0, dtype=np.int64)
    weights = 1 << np.arange(data.space.dims, dtype=np.int64)
    return data.codes.astype(np.int64) @ weights


def _dirichlet(gen, a):
    g = gen.standard_gamma(a)
    return g / g.sum()


def epsilon_gibbs(data1: Dataset, data2: Dataset, cfg: EpsilonGibbsConfig | None = None) -> EpsilonGibbsResult:
    """Posterior draws of ``eps`` by Gibbs sampling.

    Each sweep updates ``H0 -> H1 -> H2 -> all J -> eps``.  The chain starts
    from ``eps = 0.5``, uniform ``H`` vectors and ``J = 0``.

    Returns
    -------
    EpsilonGibbsResult
        Mean of the kept ``eps`` draws, the draws, and the support cells.
    """
    cfg = cfg or EpsilonGibbsConfig()
    if data1.space != data2.space:
        raise ValueError("the two samples must live on the same table")
    c1 = _cells(data1)
    c2 = _cells(data2)
    support, inv = np.unique(np.concatenate([c1, c2]), return_inverse=True)
    n1, n2 = len(c1), len(c2)
    k = max(len(support), 1)
    i1, i2 = inv[:n1], inv[n1:]
    gen = np.random.default_rng(cfg.seed)
    alpha = np.full(k, cfg.alpha_h)
    s = GibbsState(np.full(k, 1.0 / k), np.full(k, 1.0 / k), np.full(k, 1.0 / k), np.zeros(n1, bool), np.zeros(n2, bool), 0.5)
    total = n1 + n2
    draws = np.empty(cfg.kept)
    for it in range(cfg.burn_in + cfg.kept):
        s.h0 = _dirichlet(gen, alpha + np.bincount(i1[s.j1], minlength=k) + np.bincount(i2[s.j2], minlength=k))
        s.h1 = _dirichlet(gen, alpha + np.bincount(i1[~s.j1], minlength=k))
        s.h2 = _dirichlet(gen, alpha + np.bincount(i2[~s.j2], minlength=k))
        s.j1 = gen.random(n1) < shared_probability(s.eps, s.h0[i1], s.h1[i1])
        s.j2 = gen.random(n2) < shared_probability(s.eps, s.h0[i2], s.h2[i2])
        m = int(s.j1.sum() + s.j2.sum())
        s.eps = float(gen.beta(cfg.a_eps + m, cfg.b_eps + total - m))
        if cfg.check:
            s.check()
        if it >= cfg.burn_in:
            draws[it - cfg.burn_in] = s.eps
    return EpsilonGibbsResult(float(draws.mean()), draws, support)
