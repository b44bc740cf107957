import math
from itertools import permutations

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from networkx.algorithms.isomorphism import GraphMatcher
from scipy import integrate as spi

from rcmcumulants.cumulants import RCMWeight, cumulant_via_connected, nominal
from rcmcumulants.kernels import IntensitySpec, KernelSpec, Region, unit_ball_volume
from rcmcumulants.partitions import BudgetExceededError, PatternGraph
from rcmcumulants.simulate import (adjacency_bruteforce, count_embeddings_bruteforce,
                                   count_ordered_embeddings, pair_uniforms, projected_cost,
                                   run_replicates, sample_edges, sample_points)
from rcmcumulants.stats import k_statistics

TORUS = Region("torus", 2, (1.0,))
EDGE = PatternGraph.edge()
PATH3 = PatternGraph.path(3)
TRIANGLE = PatternGraph.triangle()


def adjacency_of(host: nx.Graph, n: int) -> list[set[int]]:
    return [set(host.neighbors(v)) for v in range(n)]


def monomorphisms(host: nx.Graph, g: PatternGraph) -> int:
    pattern = nx.Graph(g.edges)
    return sum(1 for _ in GraphMatcher(host, pattern).subgraph_monomorphisms_iter())


def torus(lam):
    return IntensitySpec("scaled_intensity", TORUS, lam)


# -- embedding counts ------------------------------------------------------------

@pytest.mark.parametrize("g", [EDGE, TRIANGLE, PATH3], ids=["edge", "triangle", "path3"])
def test_counts_in_triangle_host(g):
    assert count_ordered_embeddings(adjacency_of(nx.complete_graph(3), 3), g) == 6


def test_path3_in_triangle_exhaustive():
    adj = adjacency_of(nx.complete_graph(3), 3)
    hits = sum(all(phi[b - 1] in adj[phi[a - 1]] for a, b in PATH3.edges) for phi in permutations(range(3)))
    assert hits == 6


PATTERNS = [EDGE, PATH3, TRIANGLE, PatternGraph.path(4), PatternGraph.cycle(4), PatternGraph.star(3),
            PatternGraph.complete(4), PatternGraph.from_edges([(1, 2), (2, 3), (3, 1), (3, 4)]),
            PatternGraph.cycle(5)]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 10), st.floats(0.1, 0.9), st.integers(0, 2 ** 31), st.sampled_from(PATTERNS))
def test_backtracking_matches_monomorphism_oracle(n, p, seed, g):
    host = nx.gnp_random_graph(n, p, seed=seed)
    adj = adjacency_of(host, n)
    count = count_ordered_embeddings(adj, g)
    assert count == monomorphisms(host, g)
    assert count % g.automorphism_count() == 0


def test_backtracking_matches_permutation_scan():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(3, 8))
        host = nx.gnp_random_graph(n, 0.5, seed=int(rng.integers(1 << 30)))
        adj = adjacency_of(host, n)
        for g in PATTERNS[:6]:
            assert count_ordered_embeddings(adj, g) == count_embeddings_bruteforce(adj, g)


def test_empty_and_small_hosts():
    assert count_ordered_embeddings([], EDGE) == 0
    assert count_ordered_embeddings([set(), set()], EDGE) == 0
    assert count_ordered_embeddings([{1}, {0}], TRIANGLE) == 0


# -- points and edges ------------------------------------------------------------

def test_point_count_poisson_moments():
    counts = [len(sample_points(torus(100.0), seed)) for seed in range(4000)]
    mean, var = np.mean(counts), np.var(counts, ddof=1)
    assert abs(mean - 100) < 4 * math.sqrt(100 / 4000)
    # var of the sample variance of Poisson(100) is about (2*100^2 + 100)/(n-1)
    assert abs(var - 100) < 4 * math.sqrt((2 * 100 ** 2 + 100) / 3999)


def test_zero_intensity_is_empty():
    assert len(sample_points(torus(0.0), 1)) == 0


def test_growing_window_ball_mean():
    lam, d = 40.0, 2
    m = IntensitySpec("growing_window", Region("ball", d, radius=1.0), lam)
    counts = [len(sample_points(m, s)) for s in range(3000)]
    target = unit_ball_volume(d) * lam
    assert abs(np.mean(counts) - target) < 4 * math.sqrt(target / 3000)
    pts = sample_points(m, 0)
    assert np.all(np.linalg.norm(pts, axis=1) <= lam ** (1 / d) + 1e-12)


def test_pair_uniforms_symmetric_and_uniform():
    i = np.arange(20000)
    j = np.arange(20000)[::-1] + 20000
    a = pair_uniforms(7, i, j)
    np.testing.assert_array_equal(a, pair_uniforms(7, j, i))
    assert np.all((a >= 0) & (a < 1))
    assert abs(a.mean() - 0.5) < 4 * math.sqrt(1 / 12 / len(a))
    assert not np.array_equal(a, pair_uniforms(8, i, j))


@pytest.mark.parametrize("kernel", [KernelSpec("boolean", R=0.12), KernelSpec("rayleigh", beta=60.0),
                                    KernelSpec("constant", p=0.3)], ids=["boolean", "rayleigh", "constant"])
def test_neighbour_search_matches_pair_scan(kernel):
    for seed in range(100):
        pts = sample_points(torus(30.0), seed)
        a = sample_edges(pts, kernel, 1.0, TORUS, seed)
        b = adjacency_bruteforce(pts, kernel, 1.0, TORUS, seed)
        assert a == b


def test_box_neighbour_search_matches_pair_scan():
    box = Region("box", 2, (1.0,))
    m = IntensitySpec("scaled_intensity", box, 40.0)
    k = KernelSpec("boolean", R=0.15)
    for seed in range(30):
        pts = sample_points(m, seed)
        assert sample_edges(pts, k, 1.0, box, seed) == adjacency_bruteforce(pts, k, 1.0, box, seed)


def test_certain_kernel_gives_complete_graph():
    pts = sample_points(torus(20.0), 2)
    adj = sample_edges(pts, KernelSpec("constant", p=1.0), 1.0, TORUS, 0)
    n = len(pts)
    assert all(adj[v] == set(range(n)) - {v} for v in range(n))


def test_zero_radius_gives_empty_graph():
    pts = sample_points(torus(50.0), 3)
    assert all(not s for s in sample_edges(pts, KernelSpec("boolean", R=0.0), 1.0, TORUS, 0))


# -- replicates -------------------------------------------------------------------

def _lens_triangle(R):
    def lens(t):
        return 2 * R * R * math.acos(t / (2 * R)) - t / 2 * math.sqrt(4 * R * R - t * t)
    return spi.quad(lambda t: 2 * math.pi * t * lens(t), 0, R)[0]


@pytest.mark.parametrize("g,lam,R,mean", [
    (EDGE, 50.0, 0.1, 50.0 ** 2 * math.pi * 0.01),
    (PATH3, 25.0, 0.1, 25.0 ** 3 * (math.pi * 0.01) ** 2),
    (TRIANGLE, 25.0, 0.15, 25.0 ** 3 * _lens_triangle(0.15)),
], ids=["edge", "path3", "triangle"])
def test_mean_count_matches_first_moment(g, lam, R, mean):
    run = run_replicates(torus(lam), KernelSpec("boolean", R=R), g, 1000, seed=11)
    assert abs(run.mean() - mean) < 4 * run.standard_error()


def test_second_k_statistic_matches_connected_sum():
    lam, R = 30.0, 0.1
    k = KernelSpec("boolean", R=R)
    run = run_replicates(torus(lam), k, EDGE, 2000, seed=5)
    ks = k_statistics(run.counts)
    kappa2 = nominal(cumulant_via_connected(2, EDGE, RCMWeight(EDGE, k, torus(lam))).value)
    assert abs(ks.values[1] - kappa2) < 4 * ks.std_errors[1]


def test_replicates_deterministic_and_worker_invariant():
    m, k = torus(30.0), KernelSpec("boolean", R=0.1)
    a = run_replicates(m, k, TRIANGLE, 40, seed=9)
    b = run_replicates(m, k, TRIANGLE, 40, seed=9)
    c = run_replicates(m, k, TRIANGLE, 40, seed=9, workers=2)
    assert a.counts == b.counts == c.counts
    assert a.point_counts == c.point_counts
    assert a.to_csv() == c.to_csv()
    assert run_replicates(m, k, TRIANGLE, 40, seed=10).counts != a.counts


def test_sparse_triangle_counts_mostly_zero():
    run = run_replicates(torus(2.0), KernelSpec("boolean", R=0.3), TRIANGLE, 500, seed=1)
    assert np.mean(np.array(run.counts) == 0) > 0.6
    # three points are needed for any triangle
    assert all(c == 0 for c, n in zip(run.counts, run.point_counts) if n < 3)


def test_counts_are_ordered_and_divisible():
    run = run_replicates(torus(40.0), KernelSpec("boolean", R=0.15), TRIANGLE, 50, seed=2)
    assert run.automorphisms == 6
    assert all(c % 6 == 0 for c in run.counts)
    assert run.unordered_counts == [c // 6 for c in run.counts]


def test_budget_refusal():
    m, k = torus(2000.0), KernelSpec("boolean", R=0.2)
    assert projected_cost(m, k, PatternGraph.complete(4)) > 1e9
    with pytest.raises(BudgetExceededError):
        run_replicates(m, k, PatternGraph.complete(4), 100, max_cost=1e9)


def test_invalid_replicates():
    with pytest.raises(ValueError):
        run_replicates(torus(5.0), KernelSpec("boolean", R=0.1), EDGE, 0)


def test_csv_layout():
    run = run_replicates(torus(5.0), KernelSpec("boolean", R=0.1), EDGE, 3, seed=4)
    lines = run.to_csv().splitlines()
    assert lines[0] == "replicate,seed,points,count"
    assert len(lines) == 4
    assert [int(x.split(",")[3]) for x in lines[1:]] == run.counts
