"""Coupling trees built from a fitted two-sample posterior.

Three things live here: the greedy hMAP tree, random trees drawn from the
posterior (with the two sample measures' masses filled in), and the
L1 / squared-Hellinger distance draws that fall out of those trees.  A
prior sampler for a single measure is included for checking that the prior
is centered on its base.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .coopt import CooptEntry, CooptParams, PosteriorTable
from .numerics import RandomStream, as_generator
from .opt import TERMINAL, BaseMeasure, GridBase, OptParams, UniformBase, log_selector_weights
from .space import Node, SampleSpace

COUPLED = "coupled"
SPLIT = "split"
METRICS = ("l1", "hellinger2")
MAX_ATOMS = 1 << 22


@dataclass
class TreeNode:
    key: int
    region: str
    status: str
    n1: int
    n2: int
    gamma_post: float
    split_dim: int | None = None
    q1: float | None = None
    q2: float | None = None
    children: list = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return self.status == COUPLED

    def to_dict(self) -> dict:
        d = {
            "key": self.key,
            "region": self.region,
            "status": self.status,
            "n1": self.n1,
            "n2": self.n2,
            "gamma_post": self.gamma_post,
        }
        if self.split_dim is not None:
            d["split_dim"] = self.split_dim + 1
        if self.q1 is not None:
            d["q1"] = self.q1
            d["q2"] = self.q2
        if self.children:
            d["children"] = [c.to_dict() for c in self.children]
        return d


class CouplingTree:
    """A rooted tree of coupled leaves and split internal nodes.

    Split dimensions are stored 0-based and reported 1-based (``X1`` is
    dimension 0) in the JSON and text renderings.
    """

    def __init__(self, space: SampleSpace, root: TreeNode, has_masses: bool):
        self.space = space
        self.root = root
        self.has_masses = has_masses

    def nodes(self):
        """All nodes in breadth-first order."""
        out = [self.root]
        i = 0
        while i < len(out):
            out.extend(out[i].children)
            i += 1
        return out

    def leaves(self) -> list:
        return [n for n in self.nodes() if n.is_leaf]

    def split_dims(self) -> list:
        """Split dimensions of the internal nodes, breadth-first (0-based)."""
        return [n.split_dim for n in self.nodes() if not n.is_leaf]

    def __len__(self):
        return len(self.nodes())

    def __eq__(self, other):
        return isinstance(other, CouplingTree) and self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return {"space": self.space.kind, "dims": self.space.dims, "root": self.root.to_dict()}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def render(self, indent: str = "  ") -> str:
        lines = []

        def walk(node, level):
            head = f"{indent * level}[{node.region}] n1={node.n1} n2={node.n2} gamma={node.gamma_post:.3f}"
            if node.is_leaf:
                head += " coupled"
            else:
                head += f" split X{node.split_dim + 1}"
            if node.q1 is not None:
                head += f" Q1={node.q1:.4f} Q2={node.q2:.4f}"
            lines.append(head)
            for c in node.children:
                walk(c, level + 1)

        walk(self.root, 0)
        return "\n".join(lines)


def _make_node(table: PosteriorTable, e: CooptEntry, gamma: float) -> TreeNode:
    region = table.space.describe(table.space.node_from_key(e.key))
    return TreeNode(e.key, region, COUPLED, e.n1, e.n2, gamma)


def hmap_tree(table: PosteriorTable) -> CouplingTree:
    """Top-down greedy most probable coupling tree.

    At each node the coupling weight ``gamma_post`` competes with
    ``(1 - gamma_post) * lambda_post[j]`` for every admissible split;
    ties go to coupling, then to the lowest dimension.
    """
    if table.root_key not in table.entries:
        raise KeyError("posterior table has no root entry; the fit is incomplete")

    def build(e: CooptEntry) -> TreeNode:
        g = table.gamma_of(e)
        node = _make_node(table, e, g)
        if e.kind == TERMINAL:
            return node
        best, best_dim = g, None
        for d, lam in sorted(table.lambda_of(e).items()):
            w = (1.0 - g) * lam
            if w > best:
                best, best_dim = w, d
        if best_dim is not None:
            node.status = SPLIT
            node.split_dim = best_dim
            node.children = [build(table.child_entry(e, best_dim, up)) for up in (False, True)]
        return node

    return CouplingTree(table.space, build(table.root), has_masses=False)


def _node_generator(seed: int, path: tuple, key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=path + (key,))))


def _choose(u: float, probs) -> int:
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


class _PosteriorDraw:
    """One random coupling tree; node ``A`` draws from the sub-stream keyed by ``A``."""

    def __init__(self, table: PosteriorTable, stream: RandomStream):
        self.table = table
        self.seed = stream.seed
        self.path = stream.path
        p = table.params
        self.a1 = p.alpha1
        self.a2 = p.alpha2

    def _decide(self, e: CooptEntry):
        """Return ``None`` to couple, else ``(dim, theta1_lo, theta2_lo, counts)``."""
        table = self.table
        if e.kind == TERMINAL:
            return None
        g = table.gamma_of(e)
        if g >= 1.0:
            return None
        gen = _node_generator(self.seed, self.path, e.key)
        u = gen.random(2)
        if u[0] < g:
            return None
        lam = table.lambda_of(e)
        dims = list(lam)
        d = dims[_choose(u[1], [lam[k] for k in dims])]
        (a, b), (c, f) = table.child_counts(e, d)
        x = gen.standard_gamma([a + self.a1, b + self.a1, c + self.a2, f + self.a2])
        return d, x[0] / (x[0] + x[1]), x[2] / (x[2] + x[3])

    def leaves(self):
        """Masses ``(q1, q2)`` of every coupled leaf."""
        out = []
        stack = [(self.table.root, 1.0, 1.0)]
        table = self.table
        while stack:
            e, q1, q2 = stack.pop()
            dec = self._decide(e)
            if dec is None:
                out.append((q1, q2))
                continue
            d, t1, t2 = dec
            stack.append((table.child_entry(e, d, True), q1 * (1.0 - t1), q2 * (1.0 - t2)))
            stack.append((table.child_entry(e, d, False), q1 * t1, q2 * t2))
        return out

    def tree(self) -> TreeNode:
        table = self.table

        def build(e, q1, q2):
            node = _make_node(table, e, table.gamma_of(e))
            node.q1, node.q2 = q1, q2
            dec = self._decide(e)
            if dec is not None:
                d, t1, t2 = dec
                node.status = SPLIT
                node.split_dim = d
                node.children = [
                    build(table.child_entry(e, d, False), q1 * t1, q2 * t2),
                    build(table.child_entry(e, d, True), q1 * (1.0 - t1), q2 * (1.0 - t2)),
                ]
            return node

        return build(table.root, 1.0, 1.0)


def _as_stream(rng) -> RandomStream:
    if isinstance(rng, RandomStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RandomStream(int(rng))
    raise TypeError("tree sampling needs a RandomStream (or an integer seed)")


def sample_posterior_tree(table: PosteriorTable, rng) -> CouplingTree:
    """Draw ``C, J, theta1, theta2`` top-down from their posterior laws.

    Each node's randomness comes from the sub-stream of ``rng`` keyed by the
    node, so the draw is a deterministic function of ``(table, rng)``.
    """
    draw = _PosteriorDraw(table, _as_stream(rng))
    return CouplingTree(table.space, draw.tree(), has_masses=True)


def tree_distances(table: PosteriorTable, rng) -> tuple[float, float]:
    """``(L1, squared Hellinger)`` between the two measures of one posterior draw."""
    leaves = _PosteriorDraw(table, _as_stream(rng)).leaves()
    l1 = math.fsum(abs(a - b) for a, b in leaves)
    h2 = math.fsum((math.sqrt(a) - math.sqrt(b)) ** 2 for a, b in leaves)
    return l1, h2


@dataclass(frozen=True)
class DistanceSample:
    metric: str
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def summary(self) -> dict:
        q = np.quantile(self.values, [0.025, 0.5, 0.975])
        return {"mean": self.mean, "q025": float(q[0]), "q50": float(q[1]), "q975": float(q[2])}


def _metric_name(metric: str) -> str:
    m = metric.lower().replace("_", "").replace("-", "")
    if m == "l1":
        return "l1"
    if m in ("hellinger2", "squaredhellinger", "h2"):
        return "hellinger2"
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def distance_samples(table: PosteriorTable, metric: str, n_draws: int, rng) -> DistanceSample:
    """Posterior draws of the distance between the two sample distributions.

    Draw ``i`` uses the sub-stream ``rng.child(i)``, so asking for more draws
    leaves the earlier ones unchanged.
    """
    name = _metric_name(metric)
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    stream = _as_stream(rng)
    k = 0 if name == "l1" else 1
    vals = np.array([tree_distances(table, stream.child(i))[k] for i in range(n_draws)])
    return DistanceSample(name, vals)


# -- prior draws ---------------------------------------------------------


class _AtomGrid:
    """Dense array over the finest admissible cells of a bounded space."""

    def __init__(self, space: SampleSpace, limits: tuple, base: BaseMeasure):
        if any(lim is None for lim in limits):
            raise ValueError("prior draws need a finite space or a max_depth bound")
        self.space = space
        self.bits = tuple(limits)
        n = 1 << sum(self.bits)
        if n > MAX_ATOMS:
            raise ValueError(f"{n} atoms is too many for a dense prior draw; lower max_depth")
        self.shape = tuple(1 << b for b in self.bits)
        self.base = self._base_masses(base)

    def _base_masses(self, base: BaseMeasure) -> np.ndarray:
        if base is None or isinstance(base, UniformBase) or base.is_uniform:
            return np.full(self.shape, 1.0 / np.prod(self.shape))
        if isinstance(base, GridBase):
            m = base.masses
            for d, (r, b) in enumerate(zip(base.bits, self.bits)):
                if r <= b:
                    m = np.repeat(m, 1 << (b - r), axis=d) / (1 << (b - r))
                else:
                    m = m.reshape(m.shape[:d] + (1 << b, 1 << (r - b)) + m.shape[d + 1:]).sum(axis=d + 1)
            return m
        out = np.empty(self.shape)
        for idx in np.ndindex(*self.shape):
            out[idx] = math.exp(base.log_mass(Node(self.bits, idx)))
        return out

    def region(self, node: Node):
        return tuple(slice(i << (b - t), (i + 1) << (b - t)) for t, i, b in zip(node.depth, node.index, self.bits))

    def spread(self, out: np.ndarray, node: Node, mass: float):
        sl = self.region(node)
        w = self.base[sl]
        s = w.sum()
        if s > 0:
            out[sl] += mass * (w / s)
        else:
            out[sl] += mass / w.size


class _PriorSampler:
    def __init__(self, space, rule, grid: _AtomGrid, gen, rho, alpha, selector, pseudo_counts):
        self.space = space
        self.rule = rule
        self.limits = rule.dim_limits(space)
        self.grid = grid
        self.gen = gen
        self.rho = rho
        self.alpha = alpha
        self.selector = selector
        self.pseudo_counts = pseudo_counts

    def dims(self, node: Node):
        if self.rule.is_forced_terminal(node):
            return []
        return [d for d, (t, lim) in enumerate(zip(node.depth, self.limits)) if t < lim]

    def pick(self, node, dims, selector):
        lw = log_selector_weights(selector, node, dims)
        return dims[_choose(self.gen.random(), [math.exp(v) for v in lw])]

    def fill(self, node: Node, targets: list):
        """Run the single-measure prior below ``node`` for every ``(array, mass)`` target."""
        dims = self.dims(node)
        if not dims or self.gen.random() < self.rho:
            for out, m in targets:
                self.grid.spread(out, node, m)
            return
        d = self.pick(node, dims, self.selector)
        if self.pseudo_counts is not None:
            a = self.pseudo_counts(node, d)
        else:
            a = (self.alpha, self.alpha)
        g = self.gen.standard_gamma(a)
        t = g[0] / (g[0] + g[1])
        lo, hi = self.space.children(node, d)
        self.fill(lo, [(out, m * t) for out, m in targets])
        self.fill(hi, [(out, m * (1.0 - t)) for out, m in targets])


def _coopt_fill(s: _PriorSampler, params: CooptParams, node: Node, out1, out2, q1, q2):
    dims = s.dims(node)
    if not dims or s.gen.random() < params.gamma0:
        s.fill(node, [(out1, q1), (out2, q2)])
        return
    d = s.pick(node, dims, params.selector)
    g = s.gen.standard_gamma([params.alpha1, params.alpha1, params.alpha2, params.alpha2])
    t1 = g[0] / (g[0] + g[1])
    t2 = g[2] / (g[2] + g[3])
    lo, hi = s.space.children(node, d)
    _coopt_fill(s, params, lo, out1, out2, q1 * t1, q2 * t2)
    _coopt_fill(s, params, hi, out1, out2, q1 * (1.0 - t1), q2 * (1.0 - t2))


def _prior_setup(params, base, space, gen):
    if base is None:
        if space is None:
            raise ValueError("pass a base measure or a space")
        base = UniformBase(space)
    space = base.space
    rule = params.rule
    grid = _AtomGrid(space, rule.dim_limits(space), base)
    if isinstance(params, OptParams):
        s = _PriorSampler(space, rule, grid, gen, params.rho0, params.alpha, params.selector, params.pseudo_counts)
    elif isinstance(params, CooptParams):
        s = _PriorSampler(space, rule, grid, gen, params.rho0, params.alpha_base, params.base_selector, None)
    else:
        raise TypeError("params must be OptParams or CooptParams")
    return s, grid


def sample_prior_measure(params, base: BaseMeasure | None, rng, space: SampleSpace | None = None) -> np.ndarray:
    """One draw of the random measure from the prior, as masses over atoms.

    Returns an array of shape ``(2**L_1, ..., 2**L_p)`` where ``L_d`` is the
    number of admissible halvings of dimension ``d`` (for a table, shape
    ``(2,) * p`` indexed by ``cell - 1``).  A stopped node spreads its mass
    over its atoms in proportion to the base.  For :class:`CooptParams`
    the first measure of the pair is returned.
    """
    return sample_prior_measures(params, base, 1, rng, space)[0]


def sample_prior_measures(params, base: BaseMeasure | None, n_draws: int, rng, space: SampleSpace | None = None) -> np.ndarray:
    """``n_draws`` independent prior draws stacked along a leading axis."""
    gen = as_generator(rng)
    s, grid = _prior_setup(params, base, space, gen)
    out = np.zeros((n_draws,) + grid.shape)
    root = s.space.root()
    for i in range(n_draws):
        if isinstance(params, CooptParams):
            _coopt_fill(s, params, root, out[i], np.zeros(grid.shape), 1.0, 1.0)
        else:
            s.fill(root, [(out[i], 1.0)])
    return out


def sample_prior_pair(params: CooptParams, rng, space: SampleSpace) -> tuple[np.ndarray, np.ndarray]:
    """One draw of ``(Q1, Q2)`` from the co-OPT prior on a bounded space."""
    gen = as_generator(rng)
    s, grid = _prior_setup(params, None, space, gen)
    q1 = np.zeros(grid.shape)
    q2 = np.zeros(grid.shape)
    _coopt_fill(s, params, s.space.root(), q1, q2, 1.0, 1.0)
    return q1, q2
