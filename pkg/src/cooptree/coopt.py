"""Exact posterior of the coupling optional Polya tree for two samples.

For each node ``A`` the joint marginal likelihood is

    P(x1, x2|A) = gamma * P0(x1, x2|A)
                  + (1 - gamma) * sum_j lam_j * R1_j * R2_j * prod_i P(x1, x2|A^j_i)

where ``P0`` is the single-sample recursion applied to the pooled points and
``R1_j, R2_j`` are the Dirichlet-multinomial integrals of the two samples'
assignment vectors.  One depth-first traversal fills both ``P`` and ``P0``
for every node that holds data, plus the (empty) siblings met on the way.

Terminal rules
--------------
* no data: ``P = P0 = 1``;
* atom, or total depth at the technical limit: coupling and stopping are
  forced, ``P = P0 = mu(A) ** -n``;
* exactly one pooled point: ``P = P0 = 1/mu(A)``.  This closed form needs
  equal pseudo-counts within every split, which always holds here, and the
  uniform base.  Below such a node the posterior equals the prior.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .numerics import LN2, NEG_INF, clamp_probability, log_add, log_split_ratio, log_sum_exp, safe_log
from .opt import (
    EMPTY,
    SINGLE,
    SPLIT,
    TERMINAL,
    ResourceLimitError,
    Selector,
    _check_probability,
    combine_stop_split,
    log_selector_weights,
    softmax,
)
from .space import Dataset, Node, PartitionRule, SampleSpace

DEFAULT_TEST_CUTOFF = 1e-3
DEFAULT_DISTANCE_CUTOFF = 1e-4


@dataclass(frozen=True)
class CooptParams:
    """Prior parameters of the coupling optional Polya tree.

    Coupling probability ``gamma0`` and base stopping probability ``rho0``
    are constant over nodes; they are forced to 1 on technical terminal
    nodes.  ``selector`` / ``base_selector`` optionally override the flat
    ``1/M(A)`` split weights of the coupling and base trees.
    """

    gamma0: float = 0.5
    rho0: float = 0.5
    alpha1: float = 0.5
    alpha2: float = 0.5
    alpha_base: float = 0.5
    selector: Selector | None = None
    base_selector: Selector | None = None
    cutoff: float = DEFAULT_TEST_CUTOFF
    max_depth: int | None = None
    max_nodes: int | None = 5_000_000
    shortcut: bool = True

    def __post_init__(self):
        _check_probability("gamma0", self.gamma0)
        _check_probability("rho0", self.rho0)
        for name in ("alpha1", "alpha2", "alpha_base"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def rule(self) -> PartitionRule:
        return PartitionRule(self.cutoff, self.max_depth)


class CooptEntry:
    """One node of the posterior table.

    ``terms`` and ``base_terms`` hold, per admissible split, the log of the
    summands of the coupling and base recursions; the posterior selector
    probabilities are their softmax.
    """

    __slots__ = ("key", "n1", "n2", "kind", "dims", "log_p", "log_p0", "log_stop", "terms", "base_terms", "point")

    def __init__(self, key, n1, n2, kind, dims, log_p, log_p0, log_stop, terms=None, base_terms=None, point=None):
        self.key = key
        self.n1 = n1
        self.n2 = n2
        self.kind = kind
        self.dims = dims
        self.log_p = log_p
        self.log_p0 = log_p0
        self.log_stop = log_stop
        self.terms = terms
        self.base_terms = base_terms
        self.point = point

    @property
    def n(self):
        return self.n1 + self.n2


class PosteriorTable:
    """Per-node posterior of a fitted co-OPT; read-only after :func:`fit`."""

    def __init__(self, space: SampleSpace, params: CooptParams, entries: dict, n1: int, n2: int):
        self.space = space
        self.params = params
        self.entries = entries
        self.n1 = n1
        self.n2 = n2
        self.root_key = space.root_key
        rule = params.rule
        self.limits = rule.dim_limits(space)
        self.total_limit = rule.total_depth_limit
        self.log_gamma0 = math.log(params.gamma0)
        self.log_rho0 = math.log(params.rho0)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def __getitem__(self, key) -> CooptEntry:
        return self.entries[key]

    @property
    def node_count(self) -> int:
        return len(self.entries)

    @property
    def root(self) -> CooptEntry:
        return self.entries[self.root_key]

    @property
    def log_marginal(self) -> float:
        return self.root.log_p

    def relative_log_marginal(self, key=None) -> float:
        """Log marginal expressed with ``mu(Omega) = 1`` (tables use counts natively)."""
        e = self.entries[self.root_key if key is None else key]
        return e.log_p + e.n * self.space.log_total_measure

    # -- posterior parameters ------------------------------------------

    def dims_of(self, key) -> tuple:
        depths = self.space.key_depths(key)
        return tuple(d for d, (t, lim) in enumerate(zip(depths, self.limits)) if t < lim)

    def is_terminal(self, key) -> bool:
        depths = self.space.key_depths(key)
        if self.total_limit is not None and sum(depths) >= self.total_limit:
            return True
        return all(t >= lim for t, lim in zip(depths, self.limits))

    def entry(self, key) -> CooptEntry:
        return self.entries[key]

    def gamma_of(self, e: CooptEntry) -> float:
        if e.kind == TERMINAL:
            return 1.0
        if e.kind == EMPTY:
            return self.params.gamma0
        return clamp_probability(math.exp(self.log_gamma0 + e.log_p0 - e.log_p))

    def rho_of(self, e: CooptEntry) -> float:
        if e.kind == TERMINAL:
            return 1.0
        if e.kind == EMPTY:
            return self.params.rho0
        return clamp_probability(math.exp(self.log_rho0 + e.log_stop - e.log_p0))

    def _prior_lambda(self, e, selector):
        node = self.space.node_from_key(e.key) if selector is not None else None
        return dict(zip(e.dims, softmax(log_selector_weights(selector, node, e.dims))))

    def lambda_of(self, e: CooptEntry) -> dict:
        if e.kind == TERMINAL:
            return {}
        if e.terms is None:
            return self._prior_lambda(e, self.params.selector)
        return dict(zip(e.dims, softmax(e.terms)))

    def lambda_base_of(self, e: CooptEntry) -> dict:
        if e.kind == TERMINAL:
            return {}
        if e.base_terms is None:
            return self._prior_lambda(e, self.params.base_selector)
        return dict(zip(e.dims, softmax(e.base_terms)))

    def gamma_post(self, key) -> float:
        return self.gamma_of(self.entries[key])

    def rho_post(self, key) -> float:
        return self.rho_of(self.entries[key])

    def lambda_post(self, key) -> dict:
        return self.lambda_of(self.entries[key])

    def lambda_base_post(self, key) -> dict:
        return self.lambda_base_of(self.entries[key])

    def child_counts(self, e: CooptEntry, dim: int) -> tuple:
        """``((n1_lo, n1_hi), (n2_lo, n2_hi))`` for the split of ``e`` along ``dim``."""
        if e.kind == SPLIT:
            kl, kr = self.space.child_keys(e.key, dim)
            el, er = self.entries[kl], self.entries[kr]
            return (el.n1, er.n1), (el.n2, er.n2)
        if e.kind == SINGLE:
            code, label = e.point
            shift = self.space.resolution[dim] - self.space.key_depths(e.key)[dim] - 1
            up = (code[dim] >> shift) & 1
            c = (1 - up, up)
            return (c, (0, 0)) if label == 0 else ((0, 0), c)
        return (0, 0), (0, 0)

    def alpha_post(self, key) -> dict:
        """Posterior pseudo-counts per split dimension: sample 1, sample 2 and base."""
        e = self.entries[key]
        p = self.params
        out = {}
        for d in e.dims if e.kind != TERMINAL else ():
            (a, b), (c, f) = self.child_counts(e, d)
            out[d] = {
                "sample1": (p.alpha1 + a, p.alpha1 + b),
                "sample2": (p.alpha2 + c, p.alpha2 + f),
                "base": (p.alpha_base + a + c, p.alpha_base + b + f),
            }
        return out

    def child_entry(self, e: CooptEntry, dim: int, upper: bool) -> CooptEntry:
        """Entry of a child of ``e``, synthesized when it lies below a single-point node."""
        ck = self.space.child_keys(e.key, dim)[int(upper)]
        got = self.entries.get(ck)
        if got is not None:
            return got
        counts = self.child_counts(e, dim)
        n1 = counts[0][int(upper)]
        n2 = counts[1][int(upper)]
        n = n1 + n2
        log_mu = self.space.log_total_measure - LN2 * sum(self.space.key_depths(ck))
        kind = TERMINAL if self.is_terminal(ck) else (SINGLE if n == 1 else EMPTY)
        lp = -n * log_mu
        point = e.point if kind == SINGLE else None
        dims = () if kind == TERMINAL else self.dims_of(ck)
        return CooptEntry(ck, n1, n2, kind, dims, lp, lp, lp, point=point)

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        nodes = []
        for key in sorted(self.entries):
            e = self.entries[key]
            node = self.space.node_from_key(key)
            nodes.append(
                {
                    "key": key,
                    "region": self.space.describe(node),
                    "kind": e.kind,
                    "n1": e.n1,
                    "n2": e.n2,
                    "gamma_post": self.gamma_post(key),
                    "rho_post": self.rho_post(key),
                    "lambda_post": {str(d + 1): v for d, v in self.lambda_post(key).items()},
                    "log_p": e.log_p,
                    "log_p0": e.log_p0,
                }
            )
        p = self.params
        return {
            "space": {"kind": self.space.kind, "dims": self.space.dims, "bounds": self.space.bounds},
            "params": {
                "gamma0": p.gamma0,
                "rho0": p.rho0,
                "alpha1": p.alpha1,
                "alpha2": p.alpha2,
                "alpha_base": p.alpha_base,
                "cutoff": p.cutoff,
                "max_depth": p.max_depth,
            },
            "n1": self.n1,
            "n2": self.n2,
            "node_count": self.node_count,
            "nodes": nodes,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class _CooptEngine:
    def __init__(self, space: SampleSpace, params: CooptParams):
        self.space = space
        self.params = params
        rule = params.rule
        self.limits = rule.dim_limits(space)
        self.total_limit = rule.total_depth_limit
        self.entries: dict = {}
        self.log_gamma = math.log(params.gamma0)
        self.log_decouple = safe_log(1.0 - params.gamma0)
        self.log_rho = math.log(params.rho0)
        self.log_go = safe_log(1.0 - params.rho0)
        self.offsets = space._offsets
        self.masks = tuple((1 << (r + 1)) - 1 for r in space.resolution)
        self.res = space.resolution
        self.need_node = params.selector is not None or params.base_selector is not None

    def _dims(self, depths):
        return tuple(d for d, (t, lim) in enumerate(zip(depths, self.limits)) if t < lim)

    def visit(self, key, depths, codes, lab):
        entries = self.entries
        n = len(codes)
        n2 = int(np.count_nonzero(lab)) if n else 0
        n1 = n - n2
        if n == 0:
            dims = self._dims(depths)
            if not dims or (self.total_limit is not None and sum(depths) >= self.total_limit):
                return entries.setdefault(key, CooptEntry(key, 0, 0, TERMINAL, (), 0.0, 0.0, 0.0))
            return entries.setdefault(key, CooptEntry(key, 0, 0, EMPTY, dims, 0.0, 0.0, 0.0))
        params = self.params
        if params.max_nodes is not None and len(entries) >= params.max_nodes:
            raise ResourceLimitError(f"more than {params.max_nodes} nodes needed")
        total_depth = sum(depths)
        log_stop = -n * (self.space.log_total_measure - LN2 * total_depth)
        dims = self._dims(depths)
        if not dims or (self.total_limit is not None and total_depth >= self.total_limit):
            e = CooptEntry(key, n1, n2, TERMINAL, (), log_stop, log_stop, log_stop)
            return entries.setdefault(key, e)
        if n == 1 and params.shortcut:
            point = (tuple(int(c) for c in codes[0]), int(bool(lab[0])))
            e = CooptEntry(key, n1, n2, SINGLE, dims, log_stop, log_stop, log_stop, point=point)
            return entries.setdefault(key, e)

        node = self.space.node_from_key(key) if self.need_node else None
        log_lam = log_selector_weights(params.selector, node, dims)
        log_lam_b = log_selector_weights(params.base_selector, node, dims)
        a1, a2, ab = params.alpha1, params.alpha2, params.alpha_base
        terms = []
        base_terms = []
        offsets, masks, res = self.offsets, self.masks, self.res
        for j, d in enumerate(dims):
            off = offsets[d]
            h = (key >> off) & masks[d]
            kl = key + (h << off)
            kr = kl + (1 << off)
            el = entries.get(kl)
            er = entries.get(kr)
            if el is None or er is None:
                shift = res[d] - depths[d] - 1
                up = ((codes[:, d] >> shift) & 1).astype(bool)
                lo = ~up
                cd = depths[:d] + (depths[d] + 1,) + depths[d + 1:]
                if el is None:
                    el = self.visit(kl, cd, codes[lo], lab[lo])
                if er is None:
                    er = self.visit(kr, cd, codes[up], lab[up])
            terms.append(
                log_lam[j]
                # one grouped sum, so swapping the labels (with a1 == a2) is bit-exact
                + (log_split_ratio(el.n1, er.n1, a1, a1) + log_split_ratio(el.n2, er.n2, a2, a2))
                + el.log_p
                + er.log_p
            )
            base_terms.append(log_lam_b[j] + log_split_ratio(el.n1 + el.n2, er.n1 + er.n2, ab, ab) + el.log_p0 + er.log_p0)
        log_p0 = combine_stop_split(self.log_rho, self.log_go, log_stop, base_terms)
        if self.log_decouple == NEG_INF:
            log_p = self.log_gamma + log_p0
        else:
            log_p = log_add(self.log_gamma + log_p0, self.log_decouple + log_sum_exp(terms))
        e = CooptEntry(key, n1, n2, SPLIT, dims, log_p, log_p0, log_stop, terms, base_terms)
        return entries.setdefault(key, e)

    def run(self, node: Node, codes: np.ndarray, lab: np.ndarray, workers: int | None = None):
        key = self.space.key(node)
        depths = tuple(node.depth)
        if workers and workers > 1 and len(codes) > 1:
            self._prefetch_children(key, depths, codes, lab, workers)
        return self.visit(key, depths, codes, lab)

    def _prefetch_children(self, key, depths, codes, lab, workers):
        # evaluate every child subtree of the root concurrently; the shared
        # memo takes first-writer-wins inserts of identical values
        jobs = []
        for d in self._dims(depths):
            if self.total_limit is not None and sum(depths) >= self.total_limit:
                break
            off = self.offsets[d]
            h = (key >> off) & self.masks[d]
            kl = key + (h << off)
            shift = self.res[d] - depths[d] - 1
            up = ((codes[:, d] >> shift) & 1).astype(bool)
            cd = depths[:d] + (depths[d] + 1,) + depths[d + 1:]
            jobs.append((kl, cd, codes[~up], lab[~up]))
            jobs.append((kl + (1 << off), cd, codes[up], lab[up]))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for f in [pool.submit(self.visit, *job) for job in jobs]:
                f.result()


def _pooled(data1: Dataset, data2: Dataset):
    if data1.space != data2.space:
        raise ValueError("the two samples must live on the same space")
    codes = np.ascontiguousarray(np.vstack([data1.codes, data2.codes]))
    lab = np.concatenate([np.zeros(len(data1), dtype=bool), np.ones(len(data2), dtype=bool)])
    return codes, lab


def fit(data1: Dataset, data2: Dataset, params: CooptParams | None = None, workers: int | None = None) -> PosteriorTable:
    """Compute the complete posterior table from the root down.

    ``workers > 1`` evaluates the root's child subtrees on a thread pool;
    the resulting table is identical to the sequential one.
    """
    params = params or CooptParams()
    codes, lab = _pooled(data1, data2)
    eng = _CooptEngine(data1.space, params)
    eng.run(data1.space.root(), codes, lab, workers)
    return PosteriorTable(data1.space, params, eng.entries, len(data1), len(data2))


def coopt_log_marginal(node: Node, data1: Dataset, data2: Dataset, params: CooptParams | None = None) -> float:
    """``ln P(x1, x2|A)`` restricted to the points falling in ``node``."""
    params = params or CooptParams()
    codes, lab = _pooled(data1, data2)
    mask = data1.space.membership(node, codes)
    eng = _CooptEngine(data1.space, params)
    return eng.run(node, codes[mask], lab[mask]).log_p


@dataclass(frozen=True)
class CooptNodePosterior:
    gamma: float
    lambdas: dict
    alphas: dict
    rho: float
    base_lambdas: dict
    log_p: float
    log_p0: float
    n1: int
    n2: int


def coopt_posterior(node: Node, data1: Dataset, data2: Dataset, params: CooptParams | None = None) -> CooptNodePosterior:
    params = params or CooptParams()
    codes, lab = _pooled(data1, data2)
    mask = data1.space.membership(node, codes)
    eng = _CooptEngine(data1.space, params)
    e = eng.run(node, codes[mask], lab[mask])
    table = PosteriorTable(data1.space, params, eng.entries, len(data1), len(data2))
    k = e.key
    return CooptNodePosterior(
        table.gamma_post(k),
        table.lambda_post(k),
        table.alpha_post(k),
        table.rho_post(k),
        table.lambda_base_post(k),
        e.log_p,
        e.log_p0,
        e.n1,
        e.n2,
    )


def coupling_statistic(data1: Dataset, data2: Dataset, params: CooptParams | None = None) -> float:
    """Posterior coupling probability of the whole space (the co-OPT statistic)."""
    table = fit(data1, data2, params)
    return table.gamma_post(table.root_key)
