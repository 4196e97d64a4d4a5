"""Heap-indexed binary genealogies and the observed-forest container.

A cell is a heap index ``k >= 1``: its mother is ``k // 2`` and its daughters
are ``2k`` (even type) and ``2k + 1`` (odd type).  Only observed cells are
stored, so the absence of an index means the cell was not observed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Any, Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import ForestError, InvalidNodeError, OutOfRangeError

# frexp-based generation lookup is exact while indices fit in a double mantissa
MAX_DEPTH = 50


class CellType(IntEnum):
    EVEN = 0
    ODD = 1


class NodeRelations(NamedTuple):
    parent: int | None
    children: tuple[int, int]
    generation: int
    cell_type: CellType


def _as_node(k) -> int:
    if isinstance(k, (bool, np.bool_)) or not isinstance(k, (int, np.integer)):
        raise InvalidNodeError(f"node index must be an integer, got {k!r}")
    k = int(k)
    if k < 1:
        raise InvalidNodeError(f"node index must be >= 1, got {k}")
    return k


def node_relations(k: int) -> NodeRelations:
    k = _as_node(k)
    parent = None if k == 1 else k // 2
    return NodeRelations(parent, (2 * k, 2 * k + 1), k.bit_length() - 1, CellType(k & 1))


def generation(k: int) -> int:
    return _as_node(k).bit_length() - 1


def generations(nodes: np.ndarray) -> np.ndarray:
    """Vectorized floor(log2(k)) for an array of heap indices (exact below 2**53)."""
    nodes = np.asarray(nodes, dtype=np.int64)
    return (np.frexp(nodes.astype(np.float64))[1] - 1).astype(np.int64)


def generation_size(n: int) -> int:
    return 1 << n


def subtree_size(n: int) -> int:
    """Number of cells in generations 0..n of a complete tree."""
    return (1 << (n + 1)) - 1


class ForestCounts(NamedTuple):
    t_star: int
    g_star: int
    t_star_0: int
    t_star_1: int
    t_star_01: int


@dataclass(frozen=True)
class FamilyTable:
    """One row per observed cell seen as a mother, trees concatenated in order.

    ``idx0`` / ``idx1`` give the row of the even / odd daughter, or -1.
    """

    tree: np.ndarray
    node: np.ndarray
    gen: np.ndarray
    ctype: np.ndarray
    has0: np.ndarray
    has1: np.ndarray
    idx0: np.ndarray
    idx1: np.ndarray
    x: np.ndarray | None
    x0: np.ndarray | None
    x1: np.ndarray | None

    def __len__(self) -> int:
        return int(self.node.size)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class ObservedForest:
    """Immutable collection of ``m`` observed binary genealogies.

    ``trees[j]`` lists the observed heap indices of tree ``j``; ``values[j]``
    (optional) holds one measurement per observed cell in the same order.
    ``depth`` is the deepest generation that was looked at; cells below it
    count as unobserved.  It defaults to the deepest stored generation.
    """

    def __init__(
        self,
        trees: Sequence[Iterable[int]],
        values: Sequence[Iterable[float]] | None = None,
        depth: int | None = None,
    ):
        if len(trees) == 0:
            raise ForestError("a forest needs at least one tree")
        if values is not None and len(values) != len(trees):
            raise ForestError("values must be given for every tree")
        nodes_out: list[np.ndarray] = []
        values_out: list[np.ndarray] = []
        max_gen = 0
        for j, raw in enumerate(trees):
            nodes = np.asarray(list(raw) if not isinstance(raw, np.ndarray) else raw)
            if nodes.size and not np.issubdtype(nodes.dtype, np.integer):
                raise InvalidNodeError(f"tree {j}: node indices must be integers")
            nodes = nodes.astype(np.int64).ravel()
            if nodes.size == 0 or nodes.min() < 1:
                if nodes.size == 0:
                    raise ForestError(f"tree {j}: root (node 1) is not observed")
                raise InvalidNodeError(f"tree {j}: node index must be >= 1")
            order = np.argsort(nodes, kind="stable")
            nodes = nodes[order]
            if nodes[0] != 1:
                raise ForestError(f"tree {j}: root (node 1) is not observed")
            dup = nodes[1:] == nodes[:-1]
            if dup.any():
                raise ForestError(f"tree {j}: node {int(nodes[1:][dup][0])} appears twice")
            gen_max = int(generations(nodes[-1:])[0])
            if gen_max > MAX_DEPTH:
                raise ForestError(f"tree {j}: generation {gen_max} exceeds {MAX_DEPTH}")
            parents = nodes[1:] // 2
            pos = np.searchsorted(nodes, parents)
            orphan = nodes[pos] != parents
            if orphan.any():
                k = int(nodes[1:][orphan][0])
                raise ForestError(f"tree {j}: node {k} is observed but its mother {k // 2} is not")
            max_gen = max(max_gen, gen_max)
            nodes_out.append(_readonly(nodes))
            if values is not None:
                v = np.asarray(list(values[j]) if not isinstance(values[j], np.ndarray) else values[j],
                               dtype=np.float64).ravel()
                if v.size != order.size:
                    raise ForestError(f"tree {j}: {v.size} values for {order.size} nodes")
                v = v[order]
                if not np.all(np.isfinite(v)):
                    raise ForestError(f"tree {j}: values must be finite")
                values_out.append(_readonly(v))
        if depth is None:
            depth = max_gen
        depth = int(depth)
        if depth < max_gen:
            raise ForestError(f"depth {depth} is below the deepest stored generation {max_gen}")
        if depth > MAX_DEPTH:
            raise ForestError(f"depth {depth} exceeds {MAX_DEPTH}")
        self._nodes = tuple(nodes_out)
        self._values = tuple(values_out) if values is not None else None
        self._depth = depth
        self._memo: dict[Any, Any] = {}

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_dicts(cls, trees: Sequence[Mapping[int, float]], depth: int | None = None) -> "ObservedForest":
        return cls([list(t.keys()) for t in trees], [list(t.values()) for t in trees], depth)

    @classmethod
    def _trusted(cls, nodes: list[np.ndarray], values: list[np.ndarray] | None, depth: int) -> "ObservedForest":
        # Fast path for simulator output, which is valid by construction.
        obj = cls.__new__(cls)
        obj._nodes = tuple(_readonly(n) for n in nodes)
        obj._values = None if values is None else tuple(_readonly(v) for v in values)
        obj._depth = int(depth)
        obj._memo = {}
        return obj

    # -- accessors ------------------------------------------------------------

    @property
    def m(self) -> int:
        return len(self._nodes)

    @property
    def depth(self) -> int:
        return self._depth

    @property
    def has_values(self) -> bool:
        return self._values is not None

    def nodes(self, j: int) -> np.ndarray:
        return self._nodes[j]

    def values(self, j: int) -> np.ndarray:
        if self._values is None:
            raise ForestError("forest holds an observation skeleton without values")
        return self._values[j]

    def tree_dict(self, j: int) -> dict[int, float | None]:
        nodes = self._nodes[j].tolist()
        if self._values is None:
            return dict.fromkeys(nodes)
        return dict(zip(nodes, self._values[j].tolist()))

    def is_observed(self, j: int, k: int) -> bool:
        k = _as_node(k)
        nodes = self._nodes[j]
        i = int(np.searchsorted(nodes, k))
        return i < nodes.size and int(nodes[i]) == k

    def value(self, j: int, k: int) -> float:
        k = _as_node(k)
        nodes = self._nodes[j]
        i = int(np.searchsorted(nodes, k))
        if i >= nodes.size or int(nodes[i]) != k:
            raise InvalidNodeError(f"node {k} of tree {j} is not observed")
        return float(self.values(j)[i])

    @property
    def n_observed(self) -> int:
        return int(sum(n.size for n in self._nodes))

    def skeleton(self) -> "ObservedForest":
        return ObservedForest._trusted(list(self._nodes), None, self._depth)

    def reordered(self, order: Sequence[int]) -> "ObservedForest":
        order = list(order)
        if sorted(order) != list(range(self.m)):
            raise ForestError("order must be a permutation of the tree indices")
        vals = None if self._values is None else [self._values[j] for j in order]
        return ObservedForest._trusted([self._nodes[j] for j in order], vals, self._depth)

    def truncated(self, depth: int) -> "ObservedForest":
        """Forest restricted to generations 0..depth."""
        if depth < 0 or depth > self._depth:
            raise OutOfRangeError(f"depth {depth} outside 0..{self._depth}")
        limit = 1 << (depth + 1)
        keep = [n < limit for n in self._nodes]
        vals = None if self._values is None else [v[k] for v, k in zip(self._values, keep)]
        return ObservedForest._trusted([n[k] for n, k in zip(self._nodes, keep)], vals, depth)

    def equals(self, other: "ObservedForest") -> bool:
        if self.m != other.m or self._depth != other._depth or self.has_values != other.has_values:
            return False
        for j in range(self.m):
            if not np.array_equal(self._nodes[j], other._nodes[j]):
                return False
            if self._values is not None and not np.array_equal(
                self._values[j].view(np.int64), other._values[j].view(np.int64)
            ):
                return False
        return True

    def memo(self, key, factory: Callable[[], Any]):
        """Cache a derived quantity; safe because the forest never changes."""
        try:
            return self._memo[key]
        except KeyError:
            val = self._memo[key] = factory()
            return val

    # -- derived tables -------------------------------------------------------

    @cached_property
    def family(self) -> FamilyTable:
        sizes = np.fromiter((n.size for n in self._nodes), dtype=np.int64, count=self.m)
        tree = np.repeat(np.arange(self.m, dtype=np.int64), sizes)
        node = np.concatenate(self._nodes)
        shift = np.int64(self._depth + 2)
        key = (tree << shift) | node
        base = tree << shift
        # keys are sorted: trees in order, nodes ascending inside each tree
        i0 = np.searchsorted(key, base | (2 * node))
        i1 = np.searchsorted(key, base | (2 * node + 1))
        n = key.size
        has0 = key[np.minimum(i0, n - 1)] == (base | (2 * node))
        has1 = key[np.minimum(i1, n - 1)] == (base | (2 * node + 1))
        x = x0 = x1 = None
        if self._values is not None:
            x = np.concatenate(self._values)
            x0 = np.where(has0, x[np.minimum(i0, n - 1)], 0.0)
            x1 = np.where(has1, x[np.minimum(i1, n - 1)], 0.0)
        gen = generations(node)
        ctype = node & 1
        idx0 = np.where(has0, i0, -1)
        idx1 = np.where(has1, i1, -1)
        return FamilyTable(tree, node, gen, ctype, has0, has1, idx0, idx1, x, x0, x1)

    @cached_property
    def pattern_table(self) -> np.ndarray:
        """Counts of daughter patterns, shape (depth+1, 2, 4).

        Axis 1 is the mother type, axis 2 the pattern in the order
        (1,1), (1,0), (0,1), (0,0).
        """
        f = self.family
        return _readonly(kernels.pattern_counts(f.gen, f.ctype, f.has0, f.has1, self._depth + 1))

    @cached_property
    def _count_table(self) -> np.ndarray:
        pt = self.pattern_table.sum(axis=1)  # (G, 4)
        sizes = pt.sum(axis=1)
        d0 = pt[:, 0] + pt[:, 1]
        d1 = pt[:, 0] + pt[:, 2]
        both = pt[:, 0]
        return _readonly(np.stack([sizes, d0, d1, both], axis=1))

    def counts(self, n: int) -> ForestCounts:
        """Observed-cell counts over generations 0..n.

        ``t_star_i`` counts observed type-i daughters of mothers in
        generations 0..n; daughters below ``depth`` are never observed.
        """
        n = int(n)
        if n < 0 or n > self._depth:
            raise OutOfRangeError(f"generation {n} outside 0..{self._depth}")
        c = self._count_table
        cum = c[: n + 1].sum(axis=0)
        return ForestCounts(int(cum[0]), int(c[n, 0]), int(cum[1]), int(cum[2]), int(cum[3]))

    def __repr__(self) -> str:
        kind = "values" if self.has_values else "skeleton"
        return f"ObservedForest(m={self.m}, depth={self._depth}, cells={self.n_observed}, {kind})"


def counts(forest: ObservedForest, n: int) -> ForestCounts:
    return forest.counts(n)
