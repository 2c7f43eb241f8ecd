"""Brute-force marginal likelihoods on small binary tables.

Every complete configuration of the latent partition variables (coupling
``C``, split choices ``J``, base stopping ``S`` and base splits) is
enumerated explicitly; the assignment vectors are integrated in closed form
per configuration.  Nothing is memoized and nothing is shared with the
recursive engines apart from the log-gamma helpers, so agreement between the
two is a genuine check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .numerics import LN2, log_dirichlet_norm, log_sum_exp, safe_log

MAX_DIMS = 4
MAX_CONFIGS = 10**7


class EnumerationLimitError(ValueError):
    pass


def _intact(region):
    return [d for d, c in enumerate(region) if c == 0]


def _split(region, d, points):
    lo = region[:d] + (1,) + region[d + 1:]
    hi = region[:d] + (2,) + region[d + 1:]
    return (lo, [x for x in points if x[d] == 1]), (hi, [x for x in points if x[d] == 2])


def _dm(n_lo, n_hi, a):
    return log_dirichlet_norm((n_lo + a, n_hi + a)) - log_dirichlet_norm((a, a))


def _forced(region, p, limit):
    return limit is not None and (p - len(_intact(region))) >= limit


def _count_opt(m):
    c = 1
    for k in range(1, m + 1):
        c = 1 + k * c * c
    return c


def _count_coopt(m):
    c = 1
    for k in range(1, m + 1):
        c = _count_opt(k) + k * c * c
    return c


@dataclass
class _Setup:
    p: int
    rho: float
    alpha: float
    limit: int | None


def _opt_configs(region, points, s: _Setup):
    """Log weight of every base configuration below ``region``."""
    intact = _intact(region)
    log_u = -len(points) * len(intact) * LN2
    if not intact or _forced(region, s.p, s.limit):
        return [log_u]
    out = [safe_log(s.rho) + log_u]
    go = safe_log(1.0 - s.rho)
    lam = -math.log(len(intact))
    for d in intact:
        (r1, x1), (r2, x2) = _split(region, d, points)
        head = go + lam + _dm(len(x1), len(x2), s.alpha)
        left = _opt_configs(r1, x1, s)
        right = _opt_configs(r2, x2, s)
        out.extend(head + a + b for a in left for b in right)
    return out


def _coopt_configs(region, pts1, pts2, s: _Setup, gamma, a1, a2):
    """Pairs ``(log_weight, coupled_here)`` for every configuration below ``region``."""
    intact = _intact(region)
    pooled = pts1 + pts2
    if not intact or _forced(region, s.p, s.limit):
        return [(-len(pooled) * len(intact) * LN2, True)]
    out = [(safe_log(gamma) + w, True) for w in _opt_configs(region, pooled, s)]
    go = safe_log(1.0 - gamma)
    lam = -math.log(len(intact))
    for d in intact:
        (r1, x1), (r2, x2) = _split(region, d, pts1)
        (_, y1), (_, y2) = _split(region, d, pts2)
        head = go + lam + _dm(len(x1), len(x2), a1) + _dm(len(y1), len(y2), a2)
        left = _coopt_configs(r1, x1, y1, s, gamma, a1, a2)
        right = _coopt_configs(r2, x2, y2, s, gamma, a1, a2)
        out.extend((head + a + b, False) for a, _ in left for b, _ in right)
    return out


def _table_points(space, data):
    if space.kind != "table":
        raise EnumerationLimitError("the oracle only enumerates binary tables")
    if space.dims > MAX_DIMS:
        raise EnumerationLimitError(f"tables above {MAX_DIMS} dimensions are not enumerable")
    return [tuple(int(v) for v in row) for row in data.points]


def _limit(params):
    if params.cutoff == 0.0:
        return None
    v = math.log2(1.0 / params.cutoff)
    return int(round(v)) if abs(v - round(v)) < 1e-9 else math.ceil(v)


def brute_force_opt(space, data, params) -> float:
    """``ln P(x|Omega)`` under a flat-selector OPT, by enumeration."""
    pts = _table_points(space, data)
    if _count_opt(space.dims) > MAX_CONFIGS:
        raise EnumerationLimitError("too many configurations")
    s = _Setup(space.dims, params.rho0, params.alpha, _limit(params))
    return log_sum_exp(_opt_configs((0,) * space.dims, pts, s))


@dataclass(frozen=True)
class OracleResult:
    log_p: float
    gamma_post: float
    n_configs: int
    weight_total: float


def brute_force_coopt_full(space, data1, data2, params) -> OracleResult:
    pts1 = _table_points(space, data1)
    pts2 = _table_points(space, data2)
    if _count_coopt(space.dims) > MAX_CONFIGS:
        raise EnumerationLimitError("too many configurations")
    s = _Setup(space.dims, params.rho0, params.alpha_base, _limit(params))
    configs = _coopt_configs((0,) * space.dims, pts1, pts2, s, params.gamma0, params.alpha1, params.alpha2)
    weights = [w for w, _ in configs]
    total = log_sum_exp(weights)
    coupled = [w for w, c in configs if c]
    log_c = log_sum_exp(coupled) if coupled else float("-inf")
    post = [math.exp(w - total) for w in weights]
    return OracleResult(total, math.exp(log_c - total), len(configs), math.fsum(post))


def brute_force_coopt(space, data1, data2, params) -> float:
    """``ln P(x1, x2|Omega)`` under a flat-selector co-OPT, by enumeration."""
    return brute_force_coopt_full(space, data1, data2, params).log_p
