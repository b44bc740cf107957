"""Sampling the Poisson random-connection model and counting pattern embeddings."""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .kernels import IntensitySpec, KernelSpec, Region, unit_ball_volume
from .partitions import BudgetExceededError, PatternGraph

DEFAULT_MAX_COST = 2e9

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def pair_uniforms(key: int, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Counter-based uniforms in [0, 1) keyed by (key, min id, max id).

    A pair always gets the same number regardless of the order in which pairs
    are visited, so edge sets do not depend on the neighbour search.
    """
    lo = np.minimum(i, j).astype(np.uint64)
    hi = np.maximum(i, j).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = _mix(np.uint64(key) + _GOLDEN)
        z = _mix(z ^ (lo * _GOLDEN + np.uint64(1)))
        z = _mix(z ^ (hi * _M1 + np.uint64(2)))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def sample_points(intensity: IntensitySpec, rng: np.random.Generator | int) -> np.ndarray:
    """Poisson(Lambda(window)) many i.i.d. uniform points in the window."""
    rng = np.random.default_rng(rng)
    mass = intensity.total_mass
    if not math.isfinite(mass):
        raise ValueError("intensity has infinite total mass")
    count = rng.poisson(mass) if mass > 0 else 0
    return intensity.window.sample_uniform(rng, int(count))


def _candidate_pairs(points: np.ndarray, region: Region, cutoff: float | None) -> np.ndarray:
    n = len(points)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    if cutoff is None:
        i, j = np.triu_indices(n, k=1)
        return np.column_stack([i, j]).astype(np.int64)
    if region.periodic:
        sides = np.asarray(region.sides)
        tree = cKDTree(np.mod(points, sides), boxsize=sides)
    else:
        tree = cKDTree(points)
    return tree.query_pairs(cutoff, output_type="ndarray").astype(np.int64)


def sample_edges(points: np.ndarray, kernel: KernelSpec, lam: float, region: Region,
                 key: int) -> list[set[int]]:
    """Adjacency sets of the RCM on ``points``.

    Each unordered pair is kept iff its keyed uniform falls below c_lambda H.
    Pairs beyond the kernel cutoff (the radius for Boolean kernels, the
    1e-12 level for Rayleigh) are skipped by a k-d tree neighbour search.
    """
    n = len(points)
    adj: list[set[int]] = [set() for _ in range(n)]
    pairs = _candidate_pairs(points, region, kernel.cutoff(lam))
    if len(pairs) == 0:
        return adj
    dist = region.distance(points[pairs[:, 0]], points[pairs[:, 1]])
    prob = kernel.profile(dist, lam)
    keep = pair_uniforms(key, pairs[:, 0], pairs[:, 1]) < prob
    for a, b in pairs[keep].tolist():
        adj[a].add(b)
        adj[b].add(a)
    return adj


def adjacency_bruteforce(points: np.ndarray, kernel: KernelSpec, lam: float, region: Region,
                         key: int) -> list[set[int]]:
    """O(N^2) reference for :func:`sample_edges`."""
    n = len(points)
    adj: list[set[int]] = [set() for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            dist = region.distance(points[a], points[b])
            u = pair_uniforms(key, np.array([a]), np.array([b]))[0]
            if u < float(kernel.profile(dist, lam)):
                adj[a].add(b)
                adj[b].add(a)
    return adj


def _search_order(g: PatternGraph) -> list[tuple[int, list[int]]]:
    """Static vertex order (degree descending, each vertex joined to an earlier one).

    Returns (vertex, earlier neighbours) pairs, 0-based.
    """
    adj = {v - 1: {u - 1 for u in nbrs} for v, nbrs in g.adjacency().items()}
    deg = {v: len(adj[v]) for v in adj}
    first = min(adj, key=lambda v: (-deg[v], v))
    order = [first]
    placed = {first}
    while len(order) < g.r:
        frontier = [v for v in adj if v not in placed and adj[v] & placed]
        nxt = min(frontier, key=lambda v: (-len(adj[v] & placed), -deg[v], v))
        order.append(nxt)
        placed.add(nxt)
    return [(v, [u for u in order[:k] if u in adj[v]]) for k, v in enumerate(order)]


def count_ordered_embeddings(adj: list[set[int]], g: PatternGraph) -> int:
    """Number of injective maps V(g) -> host with every edge of g present."""
    n = len(adj)
    if n < g.r:
        return 0
    plan = _search_order(g)
    image = [0] * g.r
    last = len(plan) - 1

    def extend(level: int, used: set[int]) -> int:
        v, back = plan[level]
        if back:
            cands = set(adj[image[back[0]]])
            for u in back[1:]:
                cands &= adj[image[u]]
            cands -= used
        else:
            cands = set(range(n)) - used
        if level == last:
            return len(cands)
        total = 0
        for x in cands:
            image[v] = x
            used.add(x)
            total += extend(level + 1, used)
            used.discard(x)
        return total

    return extend(0, set())


def count_embeddings_bruteforce(adj: list[set[int]], g: PatternGraph) -> int:
    from itertools import permutations
    edges = [(a - 1, b - 1) for a, b in g.edges]
    return sum(all(phi[b] in adj[phi[a]] for a, b in edges)
               for phi in permutations(range(len(adj)), g.r))


# -- replicates ----------------------------------------------------------------

def _kernel_mass(kernel: KernelSpec, region: Region, lam: float) -> float:
    """Integral of c_lambda H(0, y) dy, used only for cost projection."""
    if region.periodic:
        return kernel.c(lam) * kernel.torus_integral(region, lam)
    d = region.d
    if kernel.family == "boolean":
        mass = unit_ball_volume(d) * kernel.radius(lam) ** d
    elif kernel.family == "rayleigh":
        mass = (math.pi / kernel.beta) ** (d / 2)
    else:
        mass = region.volume
    return kernel.c(lam) * min(mass, region.volume)


def projected_cost(intensity: IntensitySpec, kernel: KernelSpec, g: PatternGraph) -> float:
    """Work per replicate: pair scan plus Lambda * (1 + mean degree)^(r-1) search nodes."""
    window = intensity.window
    mass = intensity.total_mass
    degree = intensity.density * _kernel_mass(kernel, window, intensity.lam)
    pairs = mass * mass / 2 if kernel.cutoff(intensity.lam) is None else mass * (1 + degree)
    return pairs + mass * (1 + degree) ** (g.r - 1)


@dataclass
class SampleRun:
    seed: int
    lam: float
    point_counts: list[int]
    counts: list[int]
    replicate_seeds: list[int]
    automorphisms: int = 1
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)

    @property
    def replicates(self) -> int:
        return len(self.counts)

    @property
    def unordered_counts(self) -> list[int]:
        """Counts divided by |Aut(G)| (copies of G rather than embeddings)."""
        return [c // self.automorphisms for c in self.counts]

    def mean(self) -> float:
        return float(np.mean(self.counts))

    def standard_error(self) -> float:
        if self.replicates < 2:
            return float("nan")
        return float(np.std(self.counts, ddof=1) / math.sqrt(self.replicates))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["replicate", "seed", "points", "count"])
        for k, (s, n, c) in enumerate(zip(self.replicate_seeds, self.point_counts, self.counts)):
            writer.writerow([k, s, n, c])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "lambda": self.lam,
            "replicates": self.replicates,
            "mean_points": float(np.mean(self.point_counts)) if self.counts else None,
            "mean_count": self.mean() if self.counts else None,
            "std_error": self.standard_error() if self.counts else None,
            "automorphisms": self.automorphisms,
            "config": self.config,
        }


def _one_replicate(args) -> tuple[int, int, int]:
    seq, intensity, kernel, g = args
    rng = np.random.default_rng(seq)
    key = int(seq.generate_state(1, np.uint64)[0])
    pts = sample_points(intensity, rng)
    adj = sample_edges(pts, kernel, intensity.lam, intensity.window, key)
    return key, len(pts), count_ordered_embeddings(adj, g)


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def run_replicates(intensity: IntensitySpec, kernel: KernelSpec, g: PatternGraph, replicates: int,
                   seed: int = 0, workers: int = 1, max_cost: float = DEFAULT_MAX_COST,
                   config: dict | None = None) -> SampleRun:
    """Independent replicates of N_G; replicate k uses the k-th spawned seed.

    Output depends only on (seed, replicates), not on ``workers``.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    kernel.check_region(intensity.window, intensity.lam)
    cost = projected_cost(intensity, kernel, g) * replicates
    if cost > max_cost:
        raise BudgetExceededError(
            f"projected cost {cost:.3g} search steps exceeds the budget {max_cost:.3g}")
    seqs = np.random.SeedSequence(seed).spawn(replicates)
    jobs = [(s, intensity, kernel, g) for s in seqs]
    start = time.perf_counter()
    if workers > 1 and replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_replicate, jobs, chunksize=max(1, replicates // (4 * workers))))
    else:
        results = [_one_replicate(j) for j in jobs]
    wall = time.perf_counter() - start
    keys, npts, counts = (list(x) for x in zip(*results))
    return SampleRun(seed, intensity.lam, npts, counts, keys, g.automorphism_count(), wall, config or {})
