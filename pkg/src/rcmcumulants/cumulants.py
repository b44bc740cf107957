"""Virtual cumulants and moment/cumulant sums over partition diagrams.

A diagram weight maps a partition of ``[n] x [r]`` to a number.  Weights
expose a ``signature`` (a hashable summary that determines the value) so the
sums below can group partitions before evaluating anything expensive.

Numbers flow through unchanged: ``Fraction`` for exact weights, ``float``
otherwise, and correlated ``uncertainties`` values for Monte Carlo weights so
that error bars propagate through moment/cumulant conversions.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Iterable, Sequence

import networkx as nx
import numpy as np
from uncertainties import ufloat
from uncertainties.core import AffineScalarFunc

from .integrate import IntegralEstimate, integrate_connected
from .kernels import IntensitySpec, KernelSpec, RegimeSpec, diagram_exponent
from .partitions import (GridPartition, PatternGraph, QuotientGraph, SizeLimitError,
                         enumerate_labels, enumerate_partitions, is_nonflat, quotient_graph)

MAX_CONVERSION_ORDER = 20


def nominal(x) -> float:
    if isinstance(x, AffineScalarFunc):
        return x.nominal_value
    return float(x)


def std_dev(x) -> float:
    if isinstance(x, AffineScalarFunc):
        return x.std_dev
    return 0.0


# -- weights -------------------------------------------------------------------

class DiagramWeight:
    """Base diagram weight.

    ``factorizing``: F(rho) is the product of F over the blocks of rho v pi.
    ``row_exchangeable``: F is invariant under permutations of the rows.
    """

    factorizing = False
    row_exchangeable = True
    exact = False

    def signature(self, p: GridPartition) -> Hashable:
        return p

    def signature_key(self) -> Hashable:
        """Identifies the signature function for caching; None disables caching."""
        return None

    def value_of(self, sig: Hashable):
        raise NotImplementedError

    def __call__(self, p: GridPartition):
        return self.value_of(self.signature(p))


class ConstantWeight(DiagramWeight):
    exact = True

    def __init__(self, value=1):
        self.value = value
        self.factorizing = value == 1

    def signature(self, p):
        return None

    def value_of(self, sig):
        return self.value


class BlockEdgeWeight(DiagramWeight):
    """F(rho) = prod_blocks a[|b|] * prod_{edges of rho_G} e[m] * loop^(#self-loops).

    ``m`` is the edge multiplicity in the quotient multigraph, so this is the
    multiplicity-aware product prod E[v^m] form.  Every factor lives inside one
    block of rho v pi, hence the weight factorizes.
    """

    factorizing = True

    def __init__(self, g: PatternGraph, block_values: Sequence, edge_values: Sequence, loop_value=1):
        self.g = g
        self.block_values = tuple(block_values)
        self.edge_values = tuple(edge_values)
        self.loop_value = loop_value
        self.exact = all(isinstance(x, (int, Fraction)) for x in (*block_values, *edge_values, loop_value))

    def signature_key(self):
        return ("block_edge", self.g)

    def signature(self, p):
        sizes = Counter(p.labels)
        q = quotient_graph(p, self.g)
        return (tuple(sorted(Counter(sizes.values()).items())),
                tuple(sorted(Counter(q.multiplicity.values()).items())),
                sum(q.self_loops.values()))

    def value_of(self, sig):
        blocks, mults, loops = sig
        out = self.loop_value ** loops
        for size, cnt in blocks:
            out = out * self.block_values[size] ** cnt
        for m, cnt in mults:
            out = out * self.edge_values[m] ** cnt
        return out


def random_factorizing_weight(rng: np.random.Generator, g: PatternGraph, max_cells: int,
                              exact: bool = False) -> BlockEdgeWeight:
    """Random positive block/edge weights in [0.2, 2], for identity checks.

    ``exact=True`` draws dyadic rationals k/256 so every sum is computed exactly.
    """
    def draw(k):
        if exact:
            return [Fraction(int(x), 256) for x in rng.integers(52, 513, k)]
        return rng.uniform(0.2, 2.0, k).tolist()
    return BlockEdgeWeight(g, [0] + draw(max_cells), [0] + draw(max_cells), draw(1)[0])


def stable_seed(*parts) -> int:
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


class RCMWeight(DiagramWeight):
    """Random-connection-model diagram weight.

    w(rho) = integral of prod_{edges of rho_G} c H over prod Lambda(dx) on
    non-flat partitions and zero on flat ones (a flat block repeats a point
    within one copy, which an injective count never does).  Multiplicities do
    not enter since E[1_{x<->y}^m] = c H(x, y) for Bernoulli edges.  Connected components are
    integrated once per isomorphism class and reused.
    """

    factorizing = True

    def __init__(self, g: PatternGraph, kernel: KernelSpec, intensity: IntensitySpec,
                 budget: int = 200_000, seed: int = 0, exact: bool = False, sampler: str = "auto",
                 tag: str = "rcm"):
        self.g = g
        self.kernel = kernel
        self.intensity = intensity
        self.budget = budget
        self.seed = seed
        self.exact = exact
        self.sampler = sampler
        self.tag = tag
        self._labelled: dict = {}
        self._buckets: dict[str, list[int]] = {}
        self._classes: list[dict] = []

    def _class_of(self, q: QuotientGraph, comp: tuple[int, ...]) -> int:
        index = {v: i for i, v in enumerate(comp)}
        edges = frozenset((index[a], index[b]) for a, b in q.simple_edges if a in index)
        key = (len(comp), edges)
        cid = self._labelled.get(key)
        if cid is not None:
            return cid
        graph = nx.Graph()
        graph.add_nodes_from(range(len(comp)))
        graph.add_edges_from(edges)
        wl = nx.weisfeiler_lehman_graph_hash(graph, iterations=3) + f":{len(comp)}:{len(edges)}"
        bucket = self._buckets.setdefault(wl, [])
        for other in bucket:
            if nx.is_isomorphic(graph, self._classes[other]["graph"]):
                cid = other
                break
        else:
            cid = len(self._classes)
            self._classes.append({"graph": graph, "key": f"{wl}#{len(bucket)}",
                                  "quotient": QuotientGraph(len(comp), edges, {e: 1 for e in edges}),
                                  "estimate": None, "number": None})
            bucket.append(cid)
        self._labelled[key] = cid
        return cid

    def signature(self, p):
        if not is_nonflat(p):
            return None
        q = quotient_graph(p, self.g)
        return tuple(sorted(self._class_of(q, comp) for comp in q.components()))

    def class_estimate(self, cid: int) -> IntegralEstimate:
        entry = self._classes[cid]
        if entry["estimate"] is None:
            seed = stable_seed(self.seed, self.tag, entry["key"])
            est = integrate_connected(entry["quotient"], self.kernel, self.intensity, self.budget,
                                      seed, self.exact, self.sampler)
            entry["estimate"] = est
            if est.std_error > 0:
                entry["number"] = ufloat(float(est.value), est.std_error, f"{self.tag}:{entry['key']}")
            else:
                entry["number"] = est.value
        return entry["estimate"]

    def class_number(self, cid: int):
        self.class_estimate(cid)
        return self._classes[cid]["number"]

    def value_of(self, sig):
        if sig is None:
            return 0
        out = 1
        for cid in sig:
            out = out * self.class_number(cid)
        return out

    @property
    def class_count(self) -> int:
        return len(self._classes)

    def estimates(self) -> list[IntegralEstimate]:
        return [self.class_estimate(c) for c in range(len(self._classes))]


class LambdaPolynomial(dict):
    """Formal sum of monomials lambda^V c^E, stored as {(V, E): coefficient}."""

    def __add__(self, other):
        if isinstance(other, (int, Fraction)) and other == 0:
            return LambdaPolynomial(self)
        out = LambdaPolynomial(self)
        for k, v in other.items():
            out[k] = out.get(k, 0) + v
        return out

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return LambdaPolynomial({k: v * other for k, v in self.items()})
        out = LambdaPolynomial()
        for (v1, e1), a in self.items():
            for (v2, e2), b in other.items():
                key = (v1 + v2, e1 + e2)
                out[key] = out.get(key, 0) + a * b
        return out

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + other * -1

    def __rsub__(self, other):
        return self * -1 + other

    def __neg__(self):
        return self * -1

    def __pow__(self, k: int):
        out = LambdaPolynomial({(0, 0): 1})
        for _ in range(k):
            out = out * self
        return out

    def pruned(self) -> "LambdaPolynomial":
        return LambdaPolynomial({k: v for k, v in self.items() if v != 0})

    def leading_exponent(self, regime: RegimeSpec) -> Fraction | None:
        """Largest lambda-exponent among the monomials (connected diagrams)."""
        exps = [diagram_exponent(v, e, regime) for (v, e), coef in self.items() if coef]
        return max(exps) if exps else None

    def to_json(self) -> list[dict]:
        return [{"lambda_power": v, "c_power": e, "count": c} for (v, e), c in sorted(self.items()) if c]


class SymbolicWeight(DiagramWeight):
    """Monomial lambda^|V(rho_G)| c^|E(rho_G)| per non-flat diagram, zero on flat ones."""

    factorizing = True
    exact = True

    def __init__(self, g: PatternGraph):
        self.g = g

    def signature_key(self):
        return ("symbolic", self.g)

    def signature(self, p):
        if not is_nonflat(p):
            return None
        q = quotient_graph(p, self.g)
        return (q.vertex_count, q.edge_count)

    def value_of(self, sig):
        if sig is None:
            return 0
        return LambdaPolynomial({sig: 1})


# -- sums over partitions -----------------------------------------------------------

@dataclass
class DiagramSum:
    total: Any
    by_block_count: dict[int, Any]
    partitions: int


_GROUP_CACHE: dict = {}


def _signature_groups(n: int, r: int, w: DiagramWeight, filter: str) -> tuple[Counter, int]:
    key = w.signature_key()
    if key is not None and (n, r, filter, key) in _GROUP_CACHE:
        return _GROUP_CACHE[(n, r, filter, key)]
    groups: Counter = Counter()
    count = 0
    for p in enumerate_partitions(n, r, filter):
        groups[(len(p), w.signature(p))] += 1
        count += 1
    if key is not None:
        _GROUP_CACHE[(n, r, filter, key)] = (groups, count)
    return groups, count


def diagram_sum(n: int, r: int, w: DiagramWeight, filter: str = "all") -> DiagramSum:
    """Sum of w over the partitions passing ``filter``, with per-block-count subtotals."""
    groups, count = _signature_groups(n, r, w, filter)
    by_blocks: dict[int, Any] = {}
    for (blocks, sig), cnt in groups.items():
        val = w.value_of(sig)
        by_blocks[blocks] = by_blocks.get(blocks, 0) + cnt * val
    by_blocks = dict(sorted(by_blocks.items()))
    return DiagramSum(sum(by_blocks.values()), by_blocks, count)


def mobius_transform(F: DiagramWeight, eta_size: int, r: int):
    """Sum of F over every partition of [eta_size] x [r]."""
    if eta_size == 0:
        return 0
    return diagram_sum(eta_size, r, F, "all").total


def _set_partition_profiles(k: int) -> Counter:
    """Block-size profiles of the set partitions of [k], with multiplicities."""
    profiles: Counter = Counter()
    for labels in enumerate_labels(k, 1, "all"):
        profiles[tuple(sorted(Counter(labels).values()))] += 1
    return profiles


def virtual_cumulant_recursive(F: DiagramWeight, eta_size: int, r: int):
    """C_F by the recursion C_F = F_hat - sum_{|sigma| >= 2} prod_b C_F(b).

    C_F is memoized on subset sizes, valid for row-exchangeable F.
    """
    if not F.row_exchangeable:
        raise ValueError("subset-size memoization requires a row-exchangeable weight")
    if eta_size < 1:
        raise ValueError("eta_size must be >= 1")
    memo: dict[int, Any] = {}
    for k in range(1, eta_size + 1):
        value = mobius_transform(F, k, r)
        if k > 1:
            for profile, mult in _set_partition_profiles(k).items():
                if len(profile) < 2:
                    continue
                term = mult
                for size in profile:
                    term = term * memo[size]
                value = value - term
        memo[k] = value
    return memo[eta_size]


def virtual_cumulant_connected(F: DiagramWeight, eta_size: int, r: int):
    """Sum of F over the connected partitions of [eta_size] x [r]."""
    if not F.factorizing:
        raise ValueError("the connected-sum form needs a factorizing weight")
    return diagram_sum(eta_size, r, F, "connected").total


# -- moments and cumulants --------------------------------------------------------

@dataclass
class MomentVector:
    """Raw moments m_1..m_n or cumulants k_1..k_n (index 0 holds order 1)."""

    values: list
    kind: str = "moments"

    @property
    def order(self) -> int:
        return len(self.values)

    @property
    def nominal(self) -> list[float]:
        return [nominal(v) for v in self.values]

    @property
    def std_errors(self) -> list[float]:
        return [std_dev(v) for v in self.values]

    def __getitem__(self, k: int):
        return self.values[k - 1]


def _integer_partitions(n: int, largest: int | None = None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _integer_partitions(n - first, first):
            yield (first,) + rest


def _set_partition_count(profile: tuple[int, ...]) -> int:
    n = sum(profile)
    out = math.factorial(n)
    for b in profile:
        out //= math.factorial(b)
    for mult in Counter(profile).values():
        out //= math.factorial(mult)
    return out


def _convert(values: Sequence, signed: bool) -> list:
    n = len(values)
    if n > MAX_CONVERSION_ORDER:
        raise SizeLimitError(f"order {n} exceeds the conversion limit {MAX_CONVERSION_ORDER}")
    # plain floats are summed exactly and rounded once: the alternating sums cancel badly
    as_float = any(isinstance(v, float) for v in values) and all(
        isinstance(v, (int, float, Fraction, np.integer, np.floating)) for v in values)
    if as_float:
        values = [Fraction(float(v)) if isinstance(v, (float, np.floating)) else Fraction(int(v))
                  if isinstance(v, (int, np.integer)) else v for v in values]
    out = []
    for k in range(1, n + 1):
        total = 0
        for profile in _integer_partitions(k):
            blocks = len(profile)
            coef = _set_partition_count(profile)
            if signed:
                coef *= (-1) ** (blocks - 1) * math.factorial(blocks - 1)
            term = coef
            for b in profile:
                term = term * values[b - 1]
            total = total + term
        out.append(float(total) if as_float else total)
    return out


def cumulants_from_moments(m: MomentVector | Sequence) -> MomentVector:
    """kappa_n = sum_sigma (-1)^(|sigma|-1) (|sigma|-1)! prod_b m_|b|."""
    values = m.values if isinstance(m, MomentVector) else list(m)
    return MomentVector(_convert(values, signed=True), "cumulants")


def moments_from_cumulants(k: MomentVector | Sequence) -> MomentVector:
    """m_n = sum_sigma prod_b kappa_|b|."""
    values = k.values if isinstance(k, MomentVector) else list(k)
    return MomentVector(_convert(values, signed=False), "moments")


@dataclass
class CumulantReport:
    order: int
    value: Any
    std_error: float
    subtotals_by_block_count: dict[int, Any]
    symbolic_exponents: LambdaPolynomial | None = None
    partitions: int = 0
    exact: bool = False
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "order": self.order,
            "value": nominal(self.value),
            "std_error": self.std_error,
            "exact": self.exact,
            "partitions": self.partitions,
            "subtotals_by_block_count": {
                str(b): {"value": nominal(v), "std_error": std_dev(v)}
                for b, v in self.subtotals_by_block_count.items()
            },
            "symbolic_exponents": self.symbolic_exponents.to_json() if self.symbolic_exponents is not None else None,
        }
        if isinstance(self.value, Fraction):
            out["value_rational"] = str(self.value)
        out.update(self.extra)
        return out


def moment_via_partitions(n: int, g: PatternGraph, w: DiagramWeight):
    """E[N_G^n] as the weighted sum over non-flat partitions of [n] x [r]."""
    return diagram_sum(n, g.r, w, "nonflat").total


def cumulant_via_connected(n: int, g: PatternGraph, w: DiagramWeight,
                           symbolic: bool = True) -> CumulantReport:
    """kappa_n(N_G) as the weighted sum over connected non-flat partitions."""
    result = diagram_sum(n, g.r, w, "connected_nonflat")
    poly = diagram_sum(n, g.r, SymbolicWeight(g), "connected_nonflat").total if symbolic else None
    if isinstance(poly, LambdaPolynomial):
        poly = poly.pruned()
    return CumulantReport(n, result.total, std_dev(result.total), result.by_block_count, poly,
                          result.partitions, isinstance(result.total, (int, Fraction)))


def moment_vector(order: int, g: PatternGraph, w: DiagramWeight) -> MomentVector:
    return MomentVector([moment_via_partitions(k, g, w) for k in range(1, order + 1)], "moments")


def cumulant_vector(order: int, g: PatternGraph, w: DiagramWeight) -> MomentVector:
    return MomentVector([cumulant_via_connected(k, g, w, symbolic=False).value
                         for k in range(1, order + 1)], "cumulants")
