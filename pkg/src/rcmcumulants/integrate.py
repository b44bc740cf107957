"""Integrals of prod_{edges} c H(x_i, x_j) against prod Lambda(dx) over a diagram.

Routing:

* ``exact_constant`` - constant kernels, any graph;
* ``exact_tree`` - forests on a torus, where the integral factorizes into
  per-edge kernel masses;
* ``monte_carlo_tree`` - connected diagrams on a torus: root pinned,
  spanning-tree offsets drawn from the normalized kernel, the remaining edges
  averaged;
* ``monte_carlo`` - plain i.i.d. sampling from the normalized intensity.

Disconnected diagrams are integrated component by component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from .kernels import IntensitySpec, KernelSpec, Region
from .partitions import QuotientGraph

EXACT_METHODS = ("exact_tree", "exact_constant")
CHUNK = 1 << 15


class FlatDiagramError(ValueError):
    """A quotient graph with self-loops; such diagrams carry zero weight."""


@dataclass(frozen=True)
class IntegralEstimate:
    value: float | Fraction
    std_error: float
    method: str
    n_samples: int = 0
    seed: int | None = None

    @property
    def exact(self) -> bool:
        return self.method in EXACT_METHODS

    def to_json(self) -> dict:
        return {"value": float(self.value), "std_error": self.std_error, "method": self.method,
                "n_samples": self.n_samples, "seed": self.seed}


def _edges_of(q: QuotientGraph) -> list[tuple[int, int]]:
    return sorted(q.simple_edges)


def _check(q: QuotientGraph, intensity: IntensitySpec) -> None:
    if q.has_self_loops:
        raise FlatDiagramError("diagram has self-loops (flat partition); its RCM weight vanishes")
    if intensity.total_mass <= 0 and q.vertex_count > 0:
        if intensity.lam == 0:
            return
        raise ValueError("intensity has zero total mass")


def exact_constant_integral(q: QuotientGraph, kernel: KernelSpec, intensity: IntensitySpec,
                            exact: bool = False) -> IntegralEstimate:
    if kernel.family != "constant":
        raise ValueError("exact_constant route needs a constant kernel")
    v, e = q.vertex_count, q.edge_count
    if exact:
        dv = intensity.exact_density_volume()
        c = kernel.scale.exact_at(intensity.lam)
        if dv is not None and c is not None:
            dens, vol = dv
            value = (dens * vol) ** v * (c * Fraction(str(kernel.p))) ** e
            return IntegralEstimate(value, 0.0, "exact_constant")
    value = intensity.total_mass ** v * (kernel.c(intensity.lam) * kernel.p) ** e
    return IntegralEstimate(value, 0.0, "exact_constant")


def exact_tree_integral(q: QuotientGraph, kernel: KernelSpec, intensity: IntensitySpec,
                        exact: bool = False) -> IntegralEstimate:
    """density^|V| * vol^(#components) * (c I_H)^|E| for a forest on a torus."""
    if not q.is_forest():
        raise ValueError("exact_tree route needs an acyclic diagram")
    window = intensity.window
    if not window.periodic:
        raise ValueError("exact_tree route needs a torus region")
    if kernel.family == "constant":
        return exact_constant_integral(q, kernel, intensity, exact)
    lam = intensity.lam
    mass_h = kernel.torus_integral(window, lam)
    comps = len(q.components())
    value = (intensity.density ** q.vertex_count * window.volume ** comps
             * (kernel.c(lam) * mass_h) ** q.edge_count)
    return IntegralEstimate(value, 0.0, "exact_tree")


def _chunks(budget: int):
    done = 0
    while done < budget:
        k = min(CHUNK, budget - done)
        yield k
        done += k


def _accumulate(samples_iter, budget):
    total = 0.0
    total_sq = 0.0
    for w in samples_iter:
        total += float(np.sum(w))
        total_sq += float(np.sum(w * w))
    mean = total / budget
    var = max(total_sq / budget - mean * mean, 0.0)
    if budget > 1:
        var *= budget / (budget - 1)
    return mean, math.sqrt(var / budget)


def mc_integrate(q: QuotientGraph, kernel: KernelSpec, intensity: IntensitySpec,
                 budget: int = 100_000, seed: int = 0) -> IntegralEstimate:
    """Plain Monte Carlo: i.i.d. uniform points in the window."""
    _check(q, intensity)
    v = q.vertex_count
    window = intensity.window
    lam = intensity.lam
    edges = _edges_of(q)
    rng = np.random.default_rng(seed)
    scale = intensity.total_mass ** v
    if v == 0 or scale == 0:
        return IntegralEstimate(float(scale if v == 0 else 0.0), 0.0, "monte_carlo", budget, seed)

    def draws():
        for k in _chunks(budget):
            pts = window.sample_uniform(rng, k * v).reshape(k, v, window.d)
            w = np.ones(k)
            for a, b in edges:
                w *= kernel.profile(window.distance(pts[:, a], pts[:, b]), lam)
            yield w

    mean, se = _accumulate(draws(), budget)
    return IntegralEstimate(scale * mean, scale * se, "monte_carlo", budget, seed)


def _spanning_tree(vertex_count: int, edges: list[tuple[int, int]]):
    adj: dict[int, list[int]] = {v: [] for v in range(vertex_count)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    order = [0]
    parent = {0: None}
    i = 0
    while i < len(order):
        v = order[i]
        for w in sorted(adj[v]):
            if w not in parent:
                parent[w] = v
                order.append(w)
        i += 1
    if len(order) != vertex_count:
        raise ValueError("spanning-tree sampler needs a connected diagram")
    tree = {(min(w, parent[w]), max(w, parent[w])) for w in order[1:]}
    rest = [e for e in edges if e not in tree]
    return order, parent, rest


def _offset_sampler(kernel: KernelSpec, window: Region, lam: float):
    """Sampler of kernel-distributed offsets on the torus, or None."""
    d = window.d
    if kernel.family == "boolean":
        R = kernel.radius(lam)

        def sample(rng, k):
            g = rng.standard_normal((k, d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            return g * (R * rng.random(k) ** (1.0 / d))[:, None]
        return sample
    if kernel.family == "rayleigh":
        sd = 1.0 / math.sqrt(2.0 * kernel.beta)
        bounds = [L / 2 / sd for L in window.sides]

        def sample(rng, k):
            cols = [stats.truncnorm.rvs(-b, b, scale=sd, size=k, random_state=rng) for b in bounds]
            return np.column_stack(cols)
        return sample
    return None


def mc_tree_integrate(q: QuotientGraph, kernel: KernelSpec, intensity: IntensitySpec,
                      budget: int = 100_000, seed: int = 0) -> IntegralEstimate:
    """Monte Carlo along a spanning tree for connected diagrams on a torus.

    By translation invariance the root is pinned; every tree edge offset is
    drawn from the kernel normalized over the torus (uniform with weight
    vol * H where no sampler is available), and the non-tree edges are
    averaged.
    """
    _check(q, intensity)
    window = intensity.window
    if not window.periodic:
        raise ValueError("spanning-tree sampler needs a torus region")
    v = q.vertex_count
    lam = intensity.lam
    edges = _edges_of(q)
    order, parent, rest = _spanning_tree(v, edges)
    c = kernel.c(lam)
    sampler = _offset_sampler(kernel, window, lam)
    if sampler is not None:
        mass = kernel.torus_integral(window, lam)
        prefactor = intensity.density ** v * window.volume * (c * mass) ** (v - 1)
    else:
        prefactor = intensity.density ** v * window.volume
    rng = np.random.default_rng(seed)
    sides = np.asarray(window.sides)

    def draws():
        for k in _chunks(budget):
            pos = np.zeros((k, v, window.d))
            w = np.ones(k)
            for child in order[1:]:
                if sampler is not None:
                    off = sampler(rng, k)
                else:
                    off = (rng.random((k, window.d)) - 0.5) * sides
                    w *= window.volume * kernel.profile(np.linalg.norm(off, axis=1), lam)
                pos[:, child] = pos[:, parent[child]] + off
            for a, b in rest:
                w *= kernel.profile(window.distance(pos[:, a], pos[:, b]), lam)
            yield w

    if prefactor == 0:
        return IntegralEstimate(0.0, 0.0, "monte_carlo_tree", budget, seed)
    mean, se = _accumulate(draws(), budget)
    return IntegralEstimate(prefactor * mean, prefactor * se, "monte_carlo_tree", budget, seed)


def integrate_connected(q: QuotientGraph, kernel: KernelSpec, intensity: IntensitySpec,
                        budget: int = 100_000, seed: int = 0, exact: bool = False,
                        sampler: str = "auto") -> IntegralEstimate:
    _check(q, intensity)
    window = intensity.window
    if kernel.family == "constant":
        return exact_constant_integral(q, kernel, intensity, exact)
    if q.vertex_count == 1:
        return IntegralEstimate(intensity.total_mass, 0.0, "exact_tree")
    if window.periodic:
        kernel.check_region(window, intensity.lam)
        if q.is_forest():
            return exact_tree_integral(q, kernel, intensity)
        if sampler in ("auto", "spanning_tree"):
            return mc_tree_integrate(q, kernel, intensity, budget, seed)
    elif sampler == "spanning_tree":
        raise ValueError("spanning-tree sampler needs a torus region")
    if budget < 1000:
        raise ValueError("Monte Carlo budget must be at least 1000 samples")
    return mc_integrate(q, kernel, intensity, budget, seed)


def integrate_diagram(q: QuotientGraph, kernel: KernelSpec, intensity: IntensitySpec,
                      budget: int = 100_000, seed: int = 0, exact: bool = False,
                      sampler: str = "auto") -> IntegralEstimate:
    """Integrate a diagram, factorizing over its connected components.

    ``sampler`` is ``auto`` (spanning tree on tori, uniform elsewhere),
    ``uniform`` or ``spanning_tree``.
    """
    _check(q, intensity)
    comps = q.components()
    if len(comps) <= 1:
        return integrate_connected(q, kernel, intensity, budget, seed, exact, sampler)
    parts = [integrate_connected(q.subgraph(c), kernel, intensity, budget, seed + 7919 * i, exact, sampler)
             for i, c in enumerate(comps)]
    if all(isinstance(p.value, Fraction) for p in parts):
        value = math.prod((p.value for p in parts), start=Fraction(1))
    else:
        value = math.prod(float(p.value) for p in parts)
    rel = math.sqrt(sum((p.std_error / float(p.value)) ** 2 for p in parts if p.std_error > 0 and p.value))
    method = next((p.method for p in parts if not p.exact), parts[0].method)
    return IntegralEstimate(value, abs(float(value)) * rel, method, max(p.n_samples for p in parts), seed)
