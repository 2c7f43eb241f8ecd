"""Sample spaces, dyadic partition nodes and observation counting.

Two kinds of space are supported:

* ``continuous``: a bounded rectangle ``prod [lo_d, hi_d)`` split at interval
  midpoints.  Points are quantized once, at construction of a
  :class:`Dataset`, to ``resolution`` bits per dimension; every membership
  test afterwards is integer arithmetic on those codes, so the two children of
  any split partition the parent's points exactly.
* ``table``: the binary contingency table ``{1,2}^p``.  A table dimension is a
  continuous dimension with a single bit of resolution: depth 0 is "intact",
  depth 1 with index 0 or 1 is fixed at cell 1 or 2.

Node encoding
-------------
Per dimension a node stores ``(depth, index)``; internally this becomes the
heap number ``h = 2**depth + index``.  The canonical key packs the heap
numbers into one integer with a fixed field width of ``resolution + 1`` bits
per dimension.  Splitting dimension ``d`` maps ``h -> 2h`` (lower half) or
``2h + 1`` (upper half), which only touches that field, so keys do not depend
on the order in which dimensions were split.

Measures: continuous spaces are normalized to ``mu(Omega) = 1``; tables use
the counting measure, ``mu(Omega) = 2**p`` and ``mu(cell) = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .numerics import LN2

CONTINUOUS = "continuous"
TABLE = "table"
DEFAULT_RESOLUTION = 30


@dataclass(frozen=True)
class Node:
    """A dyadic box: per-dimension depth and interval index."""

    depth: tuple
    index: tuple

    def __post_init__(self):
        if len(self.depth) != len(self.index):
            raise ValueError("depth and index must have the same length")
        for t, i in zip(self.depth, self.index):
            if t < 0 or not 0 <= i < (1 << t):
                raise ValueError(f"invalid (depth, index) pair ({t}, {i})")

    @property
    def total_depth(self) -> int:
        return sum(self.depth)


@dataclass(frozen=True)
class SampleSpace:
    kind: str
    dims: int
    bounds: tuple | None = None
    resolution: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, TABLE):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.dims < 1:
            raise ValueError("a sample space needs at least one dimension")
        if self.kind == TABLE:
            object.__setattr__(self, "bounds", None)
            object.__setattr__(self, "resolution", (1,) * self.dims)
        else:
            if self.bounds is None or len(self.bounds) != self.dims:
                raise ValueError("continuous spaces need one (lo, hi) pair per dimension")
            bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
            for lo, hi in bounds:
                if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                    raise ValueError(f"invalid bounds [{lo}, {hi})")
            object.__setattr__(self, "bounds", bounds)
            res = self.resolution or (DEFAULT_RESOLUTION,) * self.dims
            if len(res) != self.dims or any(not 1 <= r <= 52 for r in res):
                raise ValueError("resolution must be 1..52 bits per dimension")
            object.__setattr__(self, "resolution", tuple(int(r) for r in res))
        offsets = []
        off = 0
        for r in self.resolution:
            offsets.append(off)
            off += r + 1
        object.__setattr__(self, "_offsets", tuple(offsets))

    # -- constructors ---------------------------------------------------

    @classmethod
    def table(cls, dims: int) -> "SampleSpace":
        return cls(TABLE, dims)

    @classmethod
    def rectangle(cls, bounds: Sequence[tuple], resolution: Sequence[int] | None = None) -> "SampleSpace":
        return cls(CONTINUOUS, len(bounds), tuple(bounds), tuple(resolution or ()))

    @classmethod
    def unit_cube(cls, dims: int = 1) -> "SampleSpace":
        return cls.rectangle([(0.0, 1.0)] * dims)

    @classmethod
    def from_data(cls, *samples, resolution: Sequence[int] | None = None) -> "SampleSpace":
        """Rectangle spanned by the pooled data range.

        The upper bound is moved up by one representable step so the largest
        observation lies strictly inside the half-open box.
        """
        pooled = np.vstack([np.atleast_2d(np.asarray(s, dtype=float).reshape(len(s), -1)) for s in samples if len(s)])
        if pooled.size == 0:
            raise ValueError("cannot infer bounds from empty samples")
        lo = pooled.min(axis=0)
        top = pooled.max(axis=0)
        bounds = []
        for d, (a, b) in enumerate(zip(lo, top)):
            if not a < b:
                raise ValueError(f"all observations share one value in dimension {d}; give explicit bounds")
            bounds.append((float(a), float(np.nextafter(b, np.inf))))
        return cls.rectangle(bounds, resolution)

    # -- measures -------------------------------------------------------

    @property
    def log_total_measure(self) -> float:
        """``ln mu(Omega)`` in the natural units of the space."""
        return self.dims * LN2 if self.kind == TABLE else 0.0

    def log_relative_measure(self, node: Node) -> float:
        return -LN2 * node.total_depth

    def log_measure(self, node: Node) -> float:
        return self.log_total_measure - LN2 * node.total_depth

    # -- nodes and keys -------------------------------------------------

    def root(self) -> Node:
        return Node((0,) * self.dims, (0,) * self.dims)

    @property
    def root_key(self) -> int:
        return sum(1 << off for off in self._offsets)

    def key(self, node: Node) -> int:
        self._check_node(node)
        k = 0
        for t, i, off in zip(node.depth, node.index, self._offsets):
            k |= ((1 << t) | i) << off
        return k

    def node_from_key(self, key: int) -> Node:
        depth, index = [], []
        for r, off in zip(self.resolution, self._offsets):
            h = (key >> off) & ((1 << (r + 1)) - 1)
            if h == 0:
                raise ValueError(f"key {key} is not a node of this space")
            t = h.bit_length() - 1
            depth.append(t)
            index.append(h - (1 << t))
        return Node(tuple(depth), tuple(index))

    def key_depths(self, key: int) -> tuple:
        return tuple(
            ((key >> off) & ((1 << (r + 1)) - 1)).bit_length() - 1
            for r, off in zip(self.resolution, self._offsets)
        )

    def child_keys(self, key: int, dim: int) -> tuple[int, int]:
        """Keys of the lower and upper halves of ``key`` along ``dim``."""
        off = self._offsets[dim]
        h = (key >> off) & ((1 << (self.resolution[dim] + 1)) - 1)
        if h.bit_length() - 1 >= self.resolution[dim]:
            raise ValueError(f"dimension {dim} cannot be split further")
        lower = key + (h << off)
        return lower, lower + (1 << off)

    def children(self, node: Node, dim: int) -> tuple[Node, Node]:
        self._check_node(node)
        if not 0 <= dim < self.dims:
            raise ValueError(f"no dimension {dim}")
        if node.depth[dim] >= self.resolution[dim]:
            raise ValueError(f"dimension {dim} cannot be split further")
        depth = node.depth[:dim] + (node.depth[dim] + 1,) + node.depth[dim + 1:]
        i = node.index[dim]
        lo = Node(depth, node.index[:dim] + (2 * i,) + node.index[dim + 1:])
        hi = Node(depth, node.index[:dim] + (2 * i + 1,) + node.index[dim + 1:])
        return lo, hi

    def _check_node(self, node: Node):
        if len(node.depth) != self.dims:
            raise ValueError("node dimension does not match the space")
        if any(t > r for t, r in zip(node.depth, self.resolution)):
            raise ValueError("node is finer than the space resolution")

    def table_node(self, cells: Sequence) -> Node:
        """Build a table node from per-dimension cells: ``None`` (intact), 1 or 2."""
        if self.kind != TABLE:
            raise ValueError("table_node is only defined for table spaces")
        if len(cells) != self.dims:
            raise ValueError("one entry per dimension required")
        depth, index = [], []
        for c in cells:
            if c is None:
                depth.append(0)
                index.append(0)
            elif c in (1, 2):
                depth.append(1)
                index.append(c - 1)
            else:
                raise ValueError(f"table cells are 1 or 2, got {c!r}")
        return Node(tuple(depth), tuple(index))

    def describe(self, node: Node) -> str:
        """Human-readable region, e.g. ``X3=2, X7=1`` or ``[0, 0.5) x [0, 1)``."""
        if self.kind == TABLE:
            parts = [f"X{d + 1}={i + 1}" for d, (t, i) in enumerate(zip(node.depth, node.index)) if t]
            return ", ".join(parts) if parts else "all"
        parts = []
        for (lo, hi), t, i in zip(self.bounds, node.depth, node.index):
            w = (hi - lo) / (1 << t)
            parts.append(f"[{lo + i * w:.6g}, {lo + (i + 1) * w:.6g})")
        return " x ".join(parts)

    # -- data -----------------------------------------------------------

    def encode(self, points) -> np.ndarray:
        """Quantize points to integer cell codes at the space resolution."""
        x = np.asarray(points, dtype=float)
        if x.size == 0:
            return np.zeros((0, self.dims), dtype=np.int64)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if self.dims == 1 else x.reshape(1, -1)
        if x.shape[1] != self.dims:
            raise ValueError(f"points have {x.shape[1]} columns, space has {self.dims}")
        if not np.all(np.isfinite(x)):
            raise ValueError("points must be finite")
        if self.kind == TABLE:
            if not np.all((x == 1) | (x == 2)):
                raise ValueError("table observations must take values 1 or 2")
            return (x - 1).astype(np.int64)
        codes = np.empty(x.shape, dtype=np.int64)
        for d, ((lo, hi), r) in enumerate(zip(self.bounds, self.resolution)):
            col = x[:, d]
            if np.any(col < lo) or np.any(col > hi):
                bad = int(np.flatnonzero((col < lo) | (col > hi))[0])
                raise ValueError(f"point {bad} lies outside [{lo}, {hi}) in dimension {d}")
            scale = float(1 << r)
            c = np.floor((col - lo) / (hi - lo) * scale).astype(np.int64)
            codes[:, d] = np.clip(c, 0, (1 << r) - 1)
        return codes

    def membership(self, node: Node, codes: np.ndarray) -> np.ndarray:
        mask = np.ones(len(codes), dtype=bool)
        for d, (t, i, r) in enumerate(zip(node.depth, node.index, self.resolution)):
            if t:
                mask &= (codes[:, d] >> (r - t)) == i
        return mask


@dataclass(frozen=True)
class PartitionRule:
    """Coordinate-wise dyadic midpoint splitting with technical termination.

    Parameters
    ----------
    cutoff : float
        Nodes whose relative measure is at or below ``cutoff`` are forced to
        stop (and, for two samples, to couple).  ``0`` disables the cutoff.
        Equivalent to a limit of ``ceil(log2(1/cutoff))`` on the total depth.
    max_depth : int, optional
        Per-dimension depth limit.  A node whose every dimension is at its
        limit is an atom.
    """

    cutoff: float = 1e-3
    max_depth: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.cutoff < 1.0:
            raise ValueError("cutoff must lie in [0, 1)")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")

    @property
    def total_depth_limit(self) -> int | None:
        if self.cutoff == 0.0:
            return None
        v = math.log2(1.0 / self.cutoff)
        r = round(v)
        return int(r) if abs(v - r) < 1e-9 else math.ceil(v)

    def dim_limits(self, space: SampleSpace) -> tuple:
        limits = []
        total = self.total_depth_limit
        for r in space.resolution:
            lim = r
            if self.max_depth is not None:
                lim = min(lim, self.max_depth)
            if total is not None:
                lim = min(lim, total)
            limits.append(lim)
        return tuple(limits)

    def splittable_dims(self, space: SampleSpace, node: Node) -> list:
        limits = self.dim_limits(space)
        return [d for d, (t, lim) in enumerate(zip(node.depth, limits)) if t < lim]

    def is_forced_terminal(self, node: Node) -> bool:
        total = self.total_depth_limit
        return total is not None and node.total_depth >= total


def num_splits(space: SampleSpace, node: Node, rule: PartitionRule | None = None) -> int:
    """Number of admissible splits ``M(A)``; zero exactly for atoms."""
    return len((rule or PartitionRule(cutoff=0.0)).splittable_dims(space, node))


def children(space: SampleSpace, node: Node, split_dim: int) -> tuple[Node, Node]:
    return space.children(node, split_dim)


def log_relative_measure(space: SampleSpace, node: Node) -> float:
    return space.log_relative_measure(node)


def canonical_key(space: SampleSpace, node: Node) -> int:
    return space.key(node)


def iter_nodes(space: SampleSpace, rule: PartitionRule | None = None) -> Iterator[Node]:
    """Every node reachable from the root, each exactly once."""
    rule = rule or PartitionRule(cutoff=0.0)
    seen = {space.root_key}
    stack = [space.root()]
    while stack:
        node = stack.pop()
        yield node
        for d in rule.splittable_dims(space, node):
            for child in space.children(node, d):
                k = space.key(child)
                if k not in seen:
                    seen.add(k)
                    stack.append(child)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations on a sample space together with their integer codes."""

    space: SampleSpace
    points: np.ndarray
    codes: np.ndarray

    @classmethod
    def from_points(cls, space: SampleSpace, points) -> "Dataset":
        x = np.asarray(points, dtype=float)
        if x.size == 0:
            x = np.zeros((0, space.dims))
        elif x.ndim == 1:
            x = x.reshape(-1, 1) if space.dims == 1 else x.reshape(1, -1)
        codes = space.encode(x)
        x = x.copy()
        x.setflags(write=False)
        codes.setflags(write=False)
        return cls(space, x, codes)

    def __len__(self) -> int:
        return len(self.codes)

    def count(self, node: Node) -> int:
        return int(self.space.membership(node, self.codes).sum())

    def permuted_dims(self, perm: Sequence[int]) -> "Dataset":
        """The same data with dimensions reordered (``new[:, k] = old[:, perm[k]]``)."""
        sp = self.space
        if sp.kind == TABLE:
            space = SampleSpace.table(sp.dims)
        else:
            space = SampleSpace.rectangle([sp.bounds[k] for k in perm], [sp.resolution[k] for k in perm])
        return Dataset.from_points(space, self.points[:, list(perm)])


def count_pair(node: Node, data1: Dataset, data2: Dataset) -> tuple[int, int]:
    return data1.count(node), data2.count(node)
