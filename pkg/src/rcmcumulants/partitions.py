"""Set partitions of the cell grid [n] x [r] and the diagrams built on them.

Cells are 1-based ``(row, col)`` pairs.  A partition is stored as a
restricted-growth string (RGS): one block label per cell in row-major order,
labels assigned in order of first appearance.  This is simultaneously the
canonical form (blocks sorted by their least cell) and the serialization.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, NamedTuple, Sequence

FULL_ENUMERATION_CAP = 13
FILTERED_ENUMERATION_CAP = 16

FILTERS = ("all", "nonflat", "connected", "connected_nonflat")


class SizeLimitError(ValueError):
    """Raised when an enumeration would exceed the configured cap."""


class BudgetExceededError(RuntimeError):
    """Raised when an enumeration runs past its wall-clock budget."""


class DimensionError(ValueError):
    pass


class Cell(NamedTuple):
    row: int
    col: int


@lru_cache(maxsize=None)
def bell_number(k: int) -> int:
    """Bell number B(k) via the Bell triangle."""
    if k < 0:
        raise ValueError("k must be non-negative")
    row = [1]
    for _ in range(k):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def _canonical(labels: Iterable) -> tuple[int, ...]:
    seen: dict = {}
    out = []
    for x in labels:
        if x not in seen:
            seen[x] = len(seen)
        out.append(seen[x])
    return tuple(out)


class GridPartition:
    """An immutable set partition of the grid ``[n] x [r]``."""

    __slots__ = ("n", "r", "labels", "_blocks")

    def __init__(self, n: int, r: int, labels: Sequence[int]):
        if n < 0 or r < 1:
            raise DimensionError(f"invalid grid {n}x{r}")
        labels = tuple(int(x) for x in labels)
        if len(labels) != n * r:
            raise DimensionError(f"expected {n * r} labels, got {len(labels)}")
        if _canonical(labels) != labels:
            raise ValueError(f"labels are not a restricted-growth string: {labels}")
        self.n = n
        self.r = r
        self.labels = labels
        self._blocks = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_labels(cls, n: int, r: int, labels: Iterable) -> "GridPartition":
        """Build from arbitrary (hashable) per-cell labels in row-major order."""
        return cls(n, r, _canonical(labels))

    @classmethod
    def from_blocks(cls, n: int, r: int, blocks: Iterable[Iterable]) -> "GridPartition":
        labels: list = [None] * (n * r)
        for b, block in enumerate(blocks):
            block = list(block)
            if not block:
                raise ValueError("empty block")
            for row, col in block:
                if not (1 <= row <= n and 1 <= col <= r):
                    raise ValueError(f"cell {(row, col)} outside {n}x{r} grid")
                idx = (row - 1) * r + (col - 1)
                if labels[idx] is not None:
                    raise ValueError(f"cell {(row, col)} appears in two blocks")
                labels[idx] = b
        if any(x is None for x in labels):
            raise ValueError("blocks do not cover the grid")
        return cls.from_labels(n, r, labels)

    @classmethod
    def from_rgs_string(cls, n: int, r: int, text: str) -> "GridPartition":
        return cls(n, r, [int(t) for t in text.split(",")])

    @classmethod
    def finest(cls, n: int, r: int) -> "GridPartition":
        return cls(n, r, range(n * r))

    @classmethod
    def coarsest(cls, n: int, r: int) -> "GridPartition":
        return cls(n, r, [0] * (n * r))

    @classmethod
    def rows(cls, n: int, r: int) -> "GridPartition":
        """The row partition with blocks {(k,1),...,(k,r)}."""
        return cls(n, r, [k for k in range(n) for _ in range(r)])

    # -- accessors --------------------------------------------------------
    @property
    def blocks(self) -> tuple[tuple[Cell, ...], ...]:
        if self._blocks is None:
            out: list[list[Cell]] = [[] for _ in range(len(self))]
            for idx, lab in enumerate(self.labels):
                out[lab].append(Cell(idx // self.r + 1, idx % self.r + 1))
            self._blocks = tuple(tuple(b) for b in out)
        return self._blocks

    def block_of(self, cell: tuple[int, int]) -> int:
        row, col = cell
        return self.labels[(row - 1) * self.r + (col - 1)]

    def __len__(self) -> int:
        return max(self.labels) + 1 if self.labels else 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridPartition):
            return NotImplemented
        return (self.n, self.r, self.labels) == (other.n, other.r, other.labels)

    def __hash__(self) -> int:
        return hash((self.n, self.r, self.labels))

    def __repr__(self) -> str:
        return f"GridPartition({self.n}x{self.r}, {self.to_rgs_string()})"

    def to_rgs_string(self) -> str:
        return ",".join(map(str, self.labels))

    def block_sets(self) -> list[frozenset[Cell]]:
        return [frozenset(b) for b in self.blocks]


# -- enumeration -------------------------------------------------------------

def _rgs_labels(n: int, r: int, nonflat: bool) -> Iterator[tuple[int, ...]]:
    size = n * r
    if size == 0:
        yield ()
        return
    labels = [-1] * size
    top = [0] * (size + 1)
    i = 0
    while i >= 0:
        lab = labels[i] + 1
        limit = top[i]
        if nonflat:
            used = labels[i - i % r:i]
            while lab <= limit and lab in used:
                lab += 1
        if lab > limit:
            labels[i] = -1
            i -= 1
            continue
        labels[i] = lab
        top[i + 1] = limit + 1 if lab == limit else limit
        if i == size - 1:
            yield tuple(labels)
        else:
            i += 1


def _labels_connected(labels: Sequence[int], n: int, r: int) -> bool:
    if n <= 1:
        return True
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    first_row: dict[int, int] = {}
    merges = 0
    for idx, lab in enumerate(labels):
        row = idx // r
        other = first_row.setdefault(lab, row)
        if other != row:
            a, b = find(other), find(row)
            if a != b:
                parent[a] = b
                merges += 1
                if merges == n - 1:
                    return True
    return False


def _labels_nonflat(labels: Sequence[int], n: int, r: int) -> bool:
    for k in range(n):
        row = labels[k * r:(k + 1) * r]
        if len(set(row)) != r:
            return False
    return True


def check_enumeration_size(n: int, r: int, filter: str = "all") -> None:
    if filter not in FILTERS:
        raise ValueError(f"unknown filter {filter!r}; expected one of {FILTERS}")
    if n < 0 or r < 1:
        raise DimensionError(f"invalid grid {n}x{r}")
    size = n * r
    cap = FILTERED_ENUMERATION_CAP if "nonflat" in filter else FULL_ENUMERATION_CAP
    if size > cap:
        raise SizeLimitError(
            f"enumerating {filter} partitions of a {n}x{r} grid exceeds the cap "
            f"n*r <= {cap}; the full lattice has Bell({size}) ~ {bell_number(size):.3e} elements"
        )


def enumerate_labels(n: int, r: int, filter: str = "all",
                     time_budget: float | None = None) -> Iterator[tuple[int, ...]]:
    """Stream restricted-growth strings of the qualifying partitions."""
    check_enumeration_size(n, r, filter)
    nonflat = "nonflat" in filter
    connected = filter.startswith("connected")
    start = time.monotonic()
    for count, labels in enumerate(_rgs_labels(n, r, nonflat)):
        if time_budget is not None and count % 4096 == 0 and time.monotonic() - start > time_budget:
            raise BudgetExceededError(f"enumeration exceeded {time_budget}s budget")
        if connected and not _labels_connected(labels, n, r):
            continue
        yield labels


def enumerate_partitions(n: int, r: int, filter: str = "all",
                         time_budget: float | None = None) -> Iterator[GridPartition]:
    """Yield each qualifying partition of [n]x[r] once, in RGS order.

    ``filter`` is one of ``all``, ``nonflat``, ``connected`` or
    ``connected_nonflat``.  Non-flat filters prune any prefix that puts two
    cells of one row into the same block.
    """
    for labels in enumerate_labels(n, r, filter, time_budget):
        p = GridPartition.__new__(GridPartition)
        p.n, p.r, p.labels, p._blocks = n, r, labels, None
        yield p


def count_partitions(n: int, r: int, filter: str = "all") -> int:
    return sum(1 for _ in enumerate_labels(n, r, filter))


# -- predicates and lattice operations -----------------------------------------

def is_nonflat(p: GridPartition) -> bool:
    return _labels_nonflat(p.labels, p.n, p.r)


def is_connected(p: GridPartition) -> bool:
    return _labels_connected(p.labels, p.n, p.r)


def _same_grid(p: GridPartition, q: GridPartition) -> None:
    if (p.n, p.r) != (q.n, q.r):
        raise DimensionError(f"grids differ: {p.n}x{p.r} vs {q.n}x{q.r}")


def join(p: GridPartition, q: GridPartition) -> GridPartition:
    """Finest partition coarser than both ``p`` and ``q``."""
    _same_grid(p, q)
    size = len(p.labels)
    parent = list(range(size))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for labels in (p.labels, q.labels):
        first: dict[int, int] = {}
        for idx, lab in enumerate(labels):
            j = first.setdefault(lab, idx)
            a, b = find(j), find(idx)
            if a != b:
                parent[max(a, b)] = min(a, b)
    return GridPartition.from_labels(p.n, p.r, (find(i) for i in range(size)))


def meet(p: GridPartition, q: GridPartition) -> GridPartition:
    """Coarsest partition finer than both: nonempty blockwise intersections."""
    _same_grid(p, q)
    return GridPartition.from_labels(p.n, p.r, zip(p.labels, q.labels))


def delete_row(p: GridPartition, i: int) -> GridPartition:
    """Drop row ``i`` (1-based) from every block, discarding emptied blocks."""
    if not 1 <= i <= p.n:
        raise ValueError(f"row {i} outside 1..{p.n}")
    r = p.r
    kept = p.labels[:(i - 1) * r] + p.labels[i * r:]
    return GridPartition.from_labels(p.n - 1, r, kept)


def removable_row(p: GridPartition) -> int:
    """Smallest row whose deletion leaves a connected partition."""
    if p.n < 2:
        raise ValueError("removable_row needs at least two rows")
    if not is_connected(p):
        raise ValueError("removable_row requires a connected partition")
    for i in range(1, p.n + 1):
        if is_connected(delete_row(p, i)):
            return i
    raise AssertionError("connected partition without a removable row")  # pragma: no cover


def split_components(p: GridPartition) -> list[tuple[tuple[int, ...], GridPartition]]:
    """Split ``p`` along the blocks of ``p v pi``.

    Returns ``(rows, sub)`` pairs with 1-based row sets in increasing order of
    their smallest row; ``sub`` is the restriction of ``p`` relabelled onto
    ``len(rows) x r``.
    """
    n, r = p.n, p.r
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    first_row: dict[int, int] = {}
    for idx, lab in enumerate(p.labels):
        row = idx // r
        other = first_row.setdefault(lab, row)
        a, b = find(other), find(row)
        if a != b:
            parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    out = []
    for rows in sorted(groups.values()):
        labs = [lab for k in rows for lab in p.labels[k * r:(k + 1) * r]]
        out.append((tuple(k + 1 for k in rows), GridPartition.from_labels(len(rows), r, labs)))
    return out


# -- pattern graphs and quotient graphs -----------------------------------------

@dataclass(frozen=True)
class PatternGraph:
    """A connected simple graph on vertices 1..r."""

    r: int
    edges: frozenset[tuple[int, int]]
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        norm = set()
        for e in self.edges:
            i, j = e
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (1 <= i <= self.r and 1 <= j <= self.r):
                raise ValueError(f"edge {e} outside 1..{self.r}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))
        if self.r < 1:
            raise ValueError("pattern graph needs at least one vertex")
        if not self._connected():
            raise ValueError("pattern graph must be connected")

    def _connected(self) -> bool:
        seen = {1}
        stack = [1]
        adj = self.adjacency()
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.r

    @classmethod
    def from_edges(cls, edges: Iterable[Sequence[int]], r: int | None = None,
                   name: str = "custom") -> "PatternGraph":
        edges = [tuple(e) for e in edges]
        if r is None:
            r = max((max(e) for e in edges), default=1)
        return cls(r, frozenset(edges), name)

    @classmethod
    def edge(cls) -> "PatternGraph":
        return cls(2, frozenset({(1, 2)}), "edge")

    @classmethod
    def path(cls, k: int) -> "PatternGraph":
        return cls(k, frozenset((i, i + 1) for i in range(1, k)), f"path{k}")

    @classmethod
    def cycle(cls, k: int) -> "PatternGraph":
        if k < 3:
            raise ValueError("cycles need at least 3 vertices")
        es = {(i, i + 1) for i in range(1, k)} | {(1, k)}
        return cls(k, frozenset(es), "triangle" if k == 3 else f"cycle{k}")

    @classmethod
    def triangle(cls) -> "PatternGraph":
        return cls.cycle(3)

    @classmethod
    def complete(cls, k: int) -> "PatternGraph":
        return cls(k, frozenset(itertools.combinations(range(1, k + 1), 2)), f"K{k}")

    @classmethod
    def star(cls, leaves: int) -> "PatternGraph":
        return cls(leaves + 1, frozenset((1, i) for i in range(2, leaves + 2)), f"star{leaves}")

    def adjacency(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {v: set() for v in range(1, self.r + 1)}
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def automorphism_count(self) -> int:
        """|Aut(G)| by brute force over vertex permutations."""
        verts = range(1, self.r + 1)
        count = 0
        for perm in itertools.permutations(verts):
            phi = dict(zip(verts, perm))
            if all((min(phi[i], phi[j]), max(phi[i], phi[j])) in self.edges for i, j in self.edges):
                count += 1
        return count


@dataclass(frozen=True)
class QuotientGraph:
    """The graph rho_G on the blocks of a partition.

    ``multiplicity`` holds the edge counts of the multigraph before
    de-duplication.  Self-loops (both endpoints of a copy of an edge in one
    block) are kept apart in ``self_loops``; they only arise from flat
    partitions.
    """

    vertex_count: int
    simple_edges: frozenset[tuple[int, int]]
    multiplicity: dict = field(compare=False, hash=False)
    self_loops: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def has_self_loops(self) -> bool:
        return bool(self.self_loops)

    @property
    def edge_count(self) -> int:
        return len(self.simple_edges)

    def components(self) -> list[tuple[int, ...]]:
        parent = list(range(self.vertex_count))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.simple_edges:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        groups: dict[int, list[int]] = {}
        for v in range(self.vertex_count):
            groups.setdefault(find(v), []).append(v)
        return [tuple(g) for g in groups.values()]

    def is_forest(self) -> bool:
        return self.edge_count == self.vertex_count - len(self.components())

    def is_connected(self) -> bool:
        return len(self.components()) == 1

    def subgraph(self, vertices: Sequence[int]) -> "QuotientGraph":
        index = {v: i for i, v in enumerate(vertices)}
        edges = frozenset((index[a], index[b]) for a, b in self.simple_edges if a in index and b in index)
        mult = {(index[a], index[b]): m for (a, b), m in self.multiplicity.items()
                if a in index and b in index}
        loops = {index[v]: m for v, m in self.self_loops.items() if v in index}
        return QuotientGraph(len(vertices), edges, mult, loops)

    def to_json(self) -> dict:
        return {
            "vertex_count": self.vertex_count,
            "edges": [[a, b, self.multiplicity[(a, b)]] for a, b in sorted(self.simple_edges)],
            "self_loops": [[v, m] for v, m in sorted(self.self_loops.items())],
        }


def quotient_graph(p: GridPartition, g: PatternGraph) -> QuotientGraph:
    if g.r != p.r:
        raise DimensionError(f"pattern has {g.r} vertices but the grid has {p.r} columns")
    labels, r = p.labels, p.r
    mult: dict[tuple[int, int], int] = {}
    loops: dict[int, int] = {}
    for k in range(p.n):
        base = k * r
        for l1, l2 in g.edges:
            a = labels[base + l1 - 1]
            b = labels[base + l2 - 1]
            if a == b:
                loops[a] = loops.get(a, 0) + 1
            else:
                key = (a, b) if a < b else (b, a)
                mult[key] = mult.get(key, 0) + 1
    return QuotientGraph(len(p), frozenset(mult), mult, loops)


# -- counting lemmas -------------------------------------------------------------

def max_block_count(n: int, r: int) -> int:
    return 1 + (r - 1) * n


def count_maximal(n: int, r: int) -> int:
    """Enumerated size of the set of maximal connected non-flat partitions."""
    if n < 1 or r < 2:
        raise ValueError("count_maximal needs n >= 1 and r >= 2")
    target = max_block_count(n, r)
    return sum(1 for labels in enumerate_labels(n, r, "connected_nonflat")
               if max(labels) + 1 == target)


def formula_maximal(n: int, r: int) -> int:
    """r^(n-1) * prod_{i=1}^{n-1} (1 + (r-1) i), exact."""
    if n < 1 or r < 1:
        raise ValueError("formula_maximal needs n, r >= 1")
    out = r ** (n - 1)
    for i in range(1, n):
        out *= 1 + (r - 1) * i
    return out


def maximal_bounds(n: int, r: int) -> tuple[int, int]:
    """Lower and upper bounds ((r-1) r)^(n-1) (n-1)! and ((r-1) r)^(n-1) n!."""
    base = ((r - 1) * r) ** (n - 1)
    return base * math.factorial(n - 1), base * math.factorial(n)


def connected_nonflat_bound(n: int, r: int) -> int:
    """Upper bound n!^r r!^(n-1) on the number of connected non-flat partitions."""
    return math.factorial(n) ** r * math.factorial(r) ** (n - 1)


def maximal_count_closed_form(n: int, r: int) -> int:
    """r^n (1 + (r-1) n)^(n-2).

    Matches the enumerated count of maximal connected non-flat partitions at
    every point the enumerator reaches; used as an alternative to
    :func:`formula_maximal`, which disagrees from n = 3 on.
    """
    if n < 1 or r < 2:
        raise ValueError("needs n >= 1 and r >= 2")
    if n == 1:
        return 1
    return r ** n * max_block_count(n, r) ** (n - 2)
