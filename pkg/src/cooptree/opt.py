"""Optional Polya tree marginal likelihood and conjugate posterior.

The recursion evaluates, for every node ``A`` with data,

    P(x|A) = rho * q0(x|A) + (1 - rho) * sum_j lam_j * D(n^j + a^j) / D(a^j) * prod_i P(x|A^j_i)

memoized by canonical node key.  ``q0(x|A)`` is the likelihood of the points
in ``A`` under the base measure conditioned on ``A``; for the uniform base it
is ``mu(A) ** -n(A)``.  All quantities are natural logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .numerics import (
    LN2,
    NEG_INF,
    clamp_probability,
    log_add,
    log_split_ratio,
    log_sum_exp,
    safe_log,
)
from .space import Dataset, Node, PartitionRule, SampleSpace

Selector = Callable[[Node, Sequence[int]], Sequence[float]]
PseudoCounts = Callable[[Node, int], tuple]


class ResourceLimitError(RuntimeError):
    """The recursion needed more nodes than the configured bound."""


class BaseSupportError(ValueError):
    """A node with data, or a split child, has zero mass under the base measure."""


# node kinds
EMPTY = "empty"
TERMINAL = "terminal"
SINGLE = "single"
SPLIT = "split"


def _check_probability(name, v, allow_zero=False):
    lo_ok = v >= 0 if allow_zero else v > 0
    if not (lo_ok and v <= 1):
        raise ValueError(f"{name} must lie in (0, 1], got {v!r}")


@dataclass(frozen=True)
class OptParams:
    """Prior parameters of a single-sample optional Polya tree.

    ``selector`` and ``pseudo_counts`` are optional per-node hooks; leaving
    them unset gives flat selector weights ``1/M(A)`` and ``alpha`` per child.
    """

    rho0: float = 0.5
    alpha: float = 0.5
    selector: Selector | None = None
    pseudo_counts: PseudoCounts | None = None
    cutoff: float = 1e-3
    max_depth: int | None = None
    max_nodes: int | None = 5_000_000
    shortcut: bool = True

    def __post_init__(self):
        _check_probability("rho0", self.rho0)
        if not self.alpha > 0:
            raise ValueError("pseudo-counts must be positive")

    @property
    def rule(self) -> PartitionRule:
        return PartitionRule(self.cutoff, self.max_depth)


class BaseMeasure:
    """Interface of a base distribution ``Q0`` on a sample space."""

    space: SampleSpace
    is_uniform = False

    def log_mass(self, node: Node) -> float:
        raise NotImplementedError

    def log_density(self, codes: np.ndarray) -> np.ndarray:
        """Per-point ``ln q0(x)`` with respect to the natural measure."""
        raise NotImplementedError


class UniformBase(BaseMeasure):
    is_uniform = True

    def __init__(self, space: SampleSpace):
        self.space = space

    def log_mass(self, node: Node) -> float:
        return self.space.log_relative_measure(node)

    def log_density(self, codes):
        return np.full(len(codes), -self.space.log_total_measure)


class GridBase(BaseMeasure):
    """Piecewise-constant base measure on a dyadic grid.

    Parameters
    ----------
    space : SampleSpace
    masses : array_like
        Cell probabilities with shape ``(2**r_1, ..., 2**r_p)``.  For a table
        space the shape is ``(2,) * p`` and entry ``[c_1 - 1, ..., c_p - 1]``
        is the probability of cell ``(c_1, ..., c_p)``.
    """

    def __init__(self, space: SampleSpace, masses):
        m = np.asarray(masses, dtype=float)
        if m.ndim != space.dims:
            raise ValueError("grid must have one axis per dimension")
        bits = []
        for size, res in zip(m.shape, space.resolution):
            r = int(size).bit_length() - 1
            if size < 1 or (1 << r) != size or r > res:
                raise ValueError("grid axes must be powers of two no finer than the space resolution")
            bits.append(r)
        if np.any(m < 0) or not math.isclose(m.sum(), 1.0, rel_tol=0, abs_tol=1e-10):
            raise ValueError("grid masses must be non-negative and sum to 1")
        self.space = space
        self.masses = m / m.sum()
        self.bits = tuple(bits)
        self.is_uniform = bool(np.all(self.masses == self.masses.flat[0]))
        self._log_cell_measure = space.log_total_measure - LN2 * sum(bits)

    def log_mass(self, node: Node) -> float:
        sl = []
        log_frac = 0.0
        for t, i, r in zip(node.depth, node.index, self.bits):
            if t <= r:
                w = 1 << (r - t)
                sl.append(slice(i * w, (i + 1) * w))
            else:
                sl.append(slice(i >> (t - r), (i >> (t - r)) + 1))
                log_frac -= LN2 * (t - r)
        return safe_log(float(self.masses[tuple(sl)].sum())) + log_frac

    def log_density(self, codes):
        idx = tuple((codes[:, d] >> (res - r)) for d, (res, r) in enumerate(zip(self.space.resolution, self.bits)))
        with np.errstate(divide="ignore"):
            return np.log(self.masses[idx]) - self._log_cell_measure


def centered_pseudocounts(node: Node, split_dim: int, base: BaseMeasure, total: float = 1.0) -> tuple:
    """Pseudo-counts proportional to the base masses of the two children.

    With these, the prior mean of the random measure is the base measure.
    """
    parent = base.log_mass(node)
    if parent == NEG_INF:
        raise BaseSupportError(f"base measure gives zero mass to {base.space.describe(node)}")
    lo, hi = base.space.children(node, split_dim)
    a_lo = total * math.exp(base.log_mass(lo) - parent)
    a_hi = total * math.exp(base.log_mass(hi) - parent)
    if a_lo <= 0 or a_hi <= 0:
        raise BaseSupportError("a split child has zero base mass; pseudo-counts must be positive")
    return a_lo, a_hi


def centered(base: BaseMeasure, total: float = 1.0) -> PseudoCounts:
    """A ``pseudo_counts`` hook centering the prior on ``base``."""
    return lambda node, dim: centered_pseudocounts(node, dim, base, total)


def log_selector_weights(selector: Selector | None, node: Node | None, dims: Sequence[int]) -> list:
    m = len(dims)
    if selector is None:
        lw = -math.log(m)
        return [lw] * m
    w = [float(v) for v in selector(node, dims)]
    if len(w) != m or any(not v > 0 for v in w):
        raise ValueError("selector weights must be positive, one per admissible split")
    if not math.isclose(sum(w), 1.0, rel_tol=0, abs_tol=1e-10):
        raise ValueError("selector weights must sum to 1")
    return [math.log(v) for v in w]


def combine_stop_split(log_p_stop: float, log_p_go: float, log_stop: float, split_terms: list) -> float:
    """``ln(p_stop * exp(log_stop) + p_go * sum exp(split_terms))``.

    Shared by the single-sample recursion and the base part of the
    two-sample recursion so both produce bit-identical values.
    """
    if log_p_go == NEG_INF:
        return log_p_stop + log_stop
    return log_add(log_p_stop + log_stop, log_p_go + log_sum_exp(split_terms))


def softmax(log_w: Sequence[float]) -> list:
    m = max(log_w)
    e = [math.exp(v - m) for v in log_w]
    s = math.fsum(e)
    return [v / s for v in e]


class OptEntry:
    __slots__ = ("key", "n", "kind", "dims", "log_p", "log_stop", "terms", "log_lambda", "alphas", "child_counts")

    def __init__(self, key, n, kind, dims, log_p, log_stop, terms=None, log_lambda=None, alphas=None, child_counts=None):
        self.key = key
        self.n = n
        self.kind = kind
        self.dims = dims
        self.log_p = log_p
        self.log_stop = log_stop
        self.terms = terms
        self.log_lambda = log_lambda
        self.alphas = alphas
        self.child_counts = child_counts


class OptPosterior:
    """Memoized marginal likelihoods and posterior parameters of one fit."""

    def __init__(self, space, data, params, base, entries, root_key):
        self.space = space
        self.data = data
        self.params = params
        self.base = base
        self.entries = entries
        self.root_key = root_key

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, key) -> OptEntry:
        return self.entries[key]

    def entry(self, node: Node) -> OptEntry:
        return self.entries[self.space.key(node)]

    @property
    def log_marginal(self) -> float:
        return self.entries[self.root_key].log_p

    def rho_post(self, key) -> float:
        e = self.entries[key]
        if e.kind == TERMINAL:
            return 1.0
        if e.kind == EMPTY:
            return self.params.rho0
        return clamp_probability(math.exp(math.log(self.params.rho0) + e.log_stop - e.log_p))

    def lambda_post(self, key) -> dict:
        e = self.entries[key]
        if e.kind == TERMINAL or not e.dims:
            return {}
        if e.terms is None:
            node = self.space.node_from_key(key)
            return dict(zip(e.dims, softmax(log_selector_weights(self.params.selector, node, e.dims))))
        return dict(zip(e.dims, softmax(e.terms)))

    def alpha_post(self, key) -> dict:
        """Per split dimension, the updated pseudo-count pair."""
        e = self.entries[key]
        if e.alphas is None:
            return {}
        return {d: (a[0] + c[0], a[1] + c[1]) for d, a, c in zip(e.dims, e.alphas, e.child_counts)}


class _OptEngine:
    def __init__(self, space: SampleSpace, params: OptParams, base: BaseMeasure | None):
        self.space = space
        self.params = params
        self.base = base if base is not None else UniformBase(space)
        if self.base.space is not space and self.base.space != space:
            raise ValueError("base measure is defined on a different space")
        rule = params.rule
        self.limits = rule.dim_limits(space)
        self.total_limit = rule.total_depth_limit
        self.entries: dict = {}
        self.log_rho = math.log(params.rho0)
        self.log_go = safe_log(1.0 - params.rho0)
        self.uniform = self.base.is_uniform and isinstance(self.base, UniformBase)
        self.shortcut = params.shortcut and self.uniform and params.pseudo_counts is None
        self.offsets = space._offsets
        self.masks = tuple((1 << (r + 1)) - 1 for r in space.resolution)

    def visit(self, key, depths, codes, logq):
        entries = self.entries
        space = self.space
        n = len(codes)
        if n == 0:
            dims = self._dims(depths)
            if not dims or (self.total_limit is not None and sum(depths) >= self.total_limit):
                return entries.setdefault(key, OptEntry(key, 0, TERMINAL, (), 0.0, 0.0))
            return entries.setdefault(key, OptEntry(key, 0, EMPTY, dims, 0.0, 0.0))
        if self.params.max_nodes is not None and len(entries) >= self.params.max_nodes:
            raise ResourceLimitError(f"more than {self.params.max_nodes} nodes needed")
        total_depth = sum(depths)
        log_mu = space.log_total_measure - LN2 * total_depth
        node = None
        if self.uniform:
            log_stop = -n * log_mu
        else:
            node = space.node_from_key(key)
            lm = self.base.log_mass(node)
            s = float(logq.sum())
            log_stop = NEG_INF if (lm == NEG_INF or s == NEG_INF) else s - n * lm
        dims = self._dims(depths)
        if not dims or (self.total_limit is not None and total_depth >= self.total_limit):
            return entries.setdefault(key, OptEntry(key, n, TERMINAL, (), log_stop, log_stop))
        if n == 1 and self.shortcut:
            return entries.setdefault(key, OptEntry(key, 1, SINGLE, dims, log_stop, log_stop))

        params = self.params
        if params.selector is not None or params.pseudo_counts is not None:
            node = node or space.node_from_key(key)
        log_lam = log_selector_weights(params.selector, node, dims)
        terms, alphas, counts = [], [], []
        for j, d in enumerate(dims):
            off = self.offsets[d]
            h = (key >> off) & self.masks[d]
            kl = key + (h << off)
            kr = kl + (1 << off)
            el = entries.get(kl)
            er = entries.get(kr)
            if el is None or er is None:
                shift = space.resolution[d] - depths[d] - 1
                up = ((codes[:, d] >> shift) & 1).astype(bool)
                lo = ~up
                cd = depths[:d] + (depths[d] + 1,) + depths[d + 1:]
                if el is None:
                    el = self.visit(kl, cd, codes[lo], logq[lo] if logq is not None else None)
                if er is None:
                    er = self.visit(kr, cd, codes[up], logq[up] if logq is not None else None)
            if params.pseudo_counts is None:
                al = ar = params.alpha
            else:
                al, ar = params.pseudo_counts(node, d)
                if not (al > 0 and ar > 0):
                    raise ValueError("pseudo-counts must be positive")
            terms.append(log_lam[j] + log_split_ratio(el.n, er.n, al, ar) + el.log_p + er.log_p)
            alphas.append((al, ar))
            counts.append((el.n, er.n))
        log_p = combine_stop_split(self.log_rho, self.log_go, log_stop, terms)
        e = OptEntry(key, n, SPLIT, dims, log_p, log_stop, terms, log_lam, alphas, counts)
        return entries.setdefault(key, e)

    def _dims(self, depths):
        return tuple(d for d, (t, lim) in enumerate(zip(depths, self.limits)) if t < lim)

    def run(self, node: Node, data: Dataset):
        space = self.space
        key = space.key(node)
        if key in self.entries:
            return self.entries[key]
        mask = space.membership(node, data.codes)
        codes = np.ascontiguousarray(data.codes[mask])
        logq = None if self.uniform else self.base.log_density(codes)
        return self.visit(key, tuple(node.depth), codes, logq)


def fit_opt(data: Dataset, params: OptParams | None = None, base: BaseMeasure | None = None) -> OptPosterior:
    """Run the full recursion from the root and return the memo table."""
    params = params or OptParams()
    eng = _OptEngine(data.space, params, base)
    eng.run(data.space.root(), data)
    return OptPosterior(data.space, data, params, eng.base, eng.entries, data.space.root_key)


def opt_log_marginal(node: Node, data: Dataset, params: OptParams | None = None, base: BaseMeasure | None = None) -> float:
    """``ln P(x|A)`` for the points of ``data`` falling in ``node``."""
    params = params or OptParams()
    eng = _OptEngine(data.space, params, base)
    return eng.run(node, data).log_p


@dataclass(frozen=True)
class OptNodePosterior:
    rho: float
    lambdas: dict
    alphas: dict
    log_p: float


def opt_posterior(node: Node, data: Dataset, params: OptParams | None = None, base: BaseMeasure | None = None) -> OptNodePosterior:
    params = params or OptParams()
    eng = _OptEngine(data.space, params, base)
    eng.run(node, data)
    post = OptPosterior(data.space, data, params, eng.base, eng.entries, data.space.key(node))
    k = post.root_key
    return OptNodePosterior(post.rho_post(k), post.lambda_post(k), post.alpha_post(k), post[k].log_p)


def gof_statistic(data: Dataset, params: OptParams | None = None, base: BaseMeasure | None = None) -> float:
    """Posterior stopping probability of the whole space.

    Large values mean the data are well described by the base measure.
    """
    post = fit_opt(data, params, base)
    return post.rho_post(post.root_key)
