"""Acceptance suites.  Each suite returns a list of :class:`CheckResult`."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .cumulants import (BlockEdgeWeight, ConstantWeight, cumulants_from_moments, moment_vector, nominal,
                        random_factorizing_weight, std_dev, virtual_cumulant_connected,
                        virtual_cumulant_recursive)
from .experiments import cumulant_reports, rcm_weight, scaling_study
from .kernels import (IntensitySpec, KernelSpec, Region, RegimeError, RegimeSpec, Scale,
                      predicted_cumulant_exponent)
from .partitions import (PatternGraph, connected_nonflat_bound, count_partitions, enumerate_labels,
                         enumerate_partitions, formula_maximal, max_block_count, maximal_bounds,
                         removable_row)
from .simulate import run_replicates
from .stats import k_statistics, ks_distance_to_normal, rate_prediction


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  [{self.suite}] {self.name}: {self.detail}"

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _timed(suite: str, name: str, fn: Callable[[], tuple[bool, str]]) -> CheckResult:
    start = time.perf_counter()
    passed, detail = fn()
    return CheckResult(suite, name, bool(passed), detail, round(time.perf_counter() - start, 3))


# -- 1. counting -------------------------------------------------------------------

COUNTING_GRID = [(n, r) for r in (2, 3) for n in range(1, 5) if n * r <= 12]


def counting_table() -> list[dict]:
    """Enumerated counts next to the closed forms, one pass per grid point."""
    rows = []
    for n, r in COUNTING_GRID:
        target = max_block_count(n, r)
        total = maximal = 0
        for labels in enumerate_labels(n, r, "connected_nonflat"):
            total += 1
            maximal += max(labels) + 1 == target
        lo, hi = maximal_bounds(n, r)
        rows.append({"n": n, "r": r, "connected_nonflat": total, "maximal": maximal,
                     "formula": formula_maximal(n, r), "lower": lo, "upper": hi,
                     "connected_bound": connected_nonflat_bound(n, r)})
    return rows


def suite_counting() -> list[CheckResult]:
    out = []
    start = time.perf_counter()
    table = counting_table()
    elapsed = round(time.perf_counter() - start, 3)
    for row in table:
        n, r = row["n"], row["r"]
        out.append(CheckResult("counting", f"maximal count formula n={n} r={r}",
                               row["maximal"] == row["formula"],
                               f"enumerated {row['maximal']}, formula {row['formula']}", elapsed))
        out.append(CheckResult("counting", f"maximal count bounds n={n} r={r}",
                               row["lower"] <= row["maximal"] <= row["upper"],
                               f"{row['lower']} <= {row['maximal']} <= {row['upper']}"))
        out.append(CheckResult("counting", f"connected non-flat bound n={n} r={r}",
                               row["connected_nonflat"] <= row["connected_bound"],
                               f"{row['connected_nonflat']} <= {row['connected_bound']}"))
    for r in (2, 3, 4):
        c = count_partitions(1, r, "connected_nonflat")
        out.append(CheckResult("counting", f"single-row connected count r={r}", c == 1, f"{c}"))
    return out


# -- 2. removable rows ---------------------------------------------------------------

def suite_removable() -> list[CheckResult]:
    out = []
    for n in range(2, 9):
        for r in range(1, 9 // n + 1):
            if n * r > 8:
                continue

            def check(n=n, r=r):
                checked = 0
                for p in enumerate_partitions(n, r, "connected"):
                    removable_row(p)
                    checked += 1
                return True, f"{checked} connected partitions, each with a removable row"
            try:
                out.append(_timed("removable", f"n={n} r={r}", check))
            except ValueError as exc:
                out.append(CheckResult("removable", f"n={n} r={r}", False, str(exc)))
    return out


# -- 3. virtual cumulant identity ------------------------------------------------------

def identity_graph(r: int) -> PatternGraph:
    if r == 1:
        return PatternGraph(1, frozenset())
    if r <= 4:
        return PatternGraph.complete(r)
    return PatternGraph.path(r)


def _identity_gaps(weights: int, seed: int, exact: bool):
    rng = np.random.default_rng(seed)
    grid = [(n, r) for n in range(1, 10) for r in range(1, 10) if n * r <= 9]
    worst, failures = 0.0, []
    for k in range(weights):
        for n, r in grid:
            w = random_factorizing_weight(rng, identity_graph(r), n * r, exact)
            a = virtual_cumulant_recursive(w, n, r)
            b = virtual_cumulant_connected(w, n, r)
            rel = float(abs(a - b) / max(abs(a), abs(b)))
            worst = max(worst, rel)
            if rel > 1e-10:
                failures.append((k, n, r, float(a), float(b)))
    return len(grid) * weights, worst, failures


def suite_identity(weights: int = 50, seed: int = 34) -> list[CheckResult]:
    """Random weights are dyadic rationals, so both sides are exact; a float
    run is reported alongside to show the cancellation in the recursion."""
    start = time.perf_counter()
    count, worst, failures = _identity_gaps(weights, seed, exact=True)
    out = [CheckResult("identity", f"{weights} random factorizing weights, n*r <= 9", not failures,
                       f"{count} comparisons in exact arithmetic, worst relative gap {worst:.2e}"
                       + (f", first failure {failures[0]}" if failures else ""),
                       round(time.perf_counter() - start, 3))]
    _, fworst, _ = _identity_gaps(5, seed + 1, exact=False)
    out.append(CheckResult("identity", "float weights (diagnostic)", fworst < 1e-8,
                           f"worst relative gap {fworst:.2e} from cancellation in the recursion"))
    g = PatternGraph.triangle()
    w = BlockEdgeWeight(g, [0, 1, 2, 3, 5, 7, 11, 13, 17, 19], [0, 2, 3, 1, 4, 1, 1], 1)
    a, b = virtual_cumulant_recursive(w, 3, 3), virtual_cumulant_connected(w, 3, 3)
    out.append(CheckResult("identity", "integer weights, exact equality n=3 r=3", a == b, f"{a} vs {b}"))
    return out


# -- 4. moment/cumulant consistency ----------------------------------------------------

UNIT_TORUS = Region("torus", 2, (1.0, 1.0))


def consistency_check(g: PatternGraph, kernel: KernelSpec, intensity: IntensitySpec, order: int,
                      budget: int, seed: int, exact: bool = False) -> list[tuple[int, object, object]]:
    mom = moment_vector(order, g, rcm_weight(g, kernel, intensity, budget, seed, exact, tag="moment"))
    from_moments = cumulants_from_moments(mom)
    reports = cumulant_reports(g, kernel, intensity, range(1, order + 1), budget, seed + 1, exact)
    return [(k, from_moments[k], reports[k - 1].value) for k in range(1, order + 1)]


def suite_consistency(budget: int = 200_000, seed: int = 4) -> list[CheckResult]:
    out = []
    boolean = KernelSpec("boolean", R=0.1)
    intensity = IntensitySpec("scaled_intensity", UNIT_TORUS, 30.0)
    for g in (PatternGraph.edge(), PatternGraph.path(3), PatternGraph.triangle()):
        def check(g=g):
            parts, ok = [], True
            for k, a, b in consistency_check(g, boolean, intensity, 3, budget, seed):
                diff = a - b
                sigma = std_dev(diff)
                gap = abs(nominal(diff))
                good = gap <= 4 * sigma + 1e-9 * abs(nominal(b))
                ok &= good
                parts.append(f"k{k}: {nominal(a):.6g} vs {nominal(b):.6g} (gap {gap:.3g}, sigma {sigma:.3g})")
            return ok, "; ".join(parts)
        out.append(_timed("consistency", f"{g.name} boolean R=0.1 lambda=30", check))
    constant = KernelSpec("constant", p=0.5)
    for g in (PatternGraph.edge(), PatternGraph.path(3), PatternGraph.triangle()):
        def check_exact(g=g):
            rows = consistency_check(g, constant, intensity, 3, budget, seed, exact=True)
            ok = all(isinstance(a, Fraction) and a == b for _, a, b in rows)
            return ok, "; ".join(f"k{k} = {b}" for k, _, b in rows)
        out.append(_timed("consistency", f"{g.name} constant p=1/2 exact", check_exact))
    return out


# -- 5. simulation ---------------------------------------------------------------------

def suite_simulation(replicates: int = 4000, seed: int = 5) -> list[CheckResult]:
    lam, R = 50.0, 0.1
    kernel = KernelSpec("boolean", R=R)
    intensity = IntensitySpec("scaled_intensity", UNIT_TORUS, lam)
    g = PatternGraph.edge()
    run = run_replicates(intensity, kernel, g, replicates, seed)
    target = lam ** 2 * math.pi * R * R
    mean, se = run.mean(), run.standard_error()
    ks = k_statistics(run.counts)
    kappa2 = cumulant_reports(g, kernel, intensity, [2], 1000, seed)[0].value
    out = [
        CheckResult("simulation", "edge mean vs lambda^2 pi R^2", abs(mean - target) <= 4 * se,
                    f"mean {mean:.4f} +- {se:.4f}, target {target:.4f}, {replicates} replicates", run.wall_time),
        CheckResult("simulation", "edge k2 vs diagram kappa2", abs(ks.k2 - kappa2) <= 4 * ks.std_errors[1],
                    f"k2 {ks.k2:.3f} +- {ks.std_errors[1]:.3f}, kappa2 {float(kappa2):.3f}"),
    ]
    return out


# -- 6. scaling -----------------------------------------------------------------------

SCALING_LAMBDAS = [20.0, 40.0, 80.0, 160.0]


def scaling_cases():
    """(name, graph, kernel, intensity, regime, tolerance)."""
    return [
        ("edge dilute", PatternGraph.edge(), KernelSpec("boolean", R=1.0),
         IntensitySpec("scaled_intensity", Region("torus", 2, (4.0, 4.0)), 1.0),
         RegimeSpec("dilute", 0.0), 0.05),
        ("triangle rgg thermodynamic", PatternGraph.triangle(), KernelSpec("boolean", R=1.0, radius_exponent=0.5),
         IntensitySpec("scaled_intensity", UNIT_TORUS, 1.0),
         RegimeSpec("rgg_thermodynamic", radius_base=1.0, radius_exponent=0.5, d=2), 0.15),
        ("edge rgg sparse", PatternGraph.edge(), KernelSpec("boolean", R=0.1, radius_exponent=0.75),
         IntensitySpec("scaled_intensity", UNIT_TORUS, 1.0),
         RegimeSpec("rgg_sparse", radius_base=0.1, radius_exponent=0.75, d=2), 0.2),
    ]


def suite_scaling(budget: int = 200_000, seed: int = 6) -> list[CheckResult]:
    out = []
    for name, g, kernel, intensity, regime, tol in scaling_cases():
        def check(g=g, kernel=kernel, intensity=intensity, regime=regime, tol=tol):
            study = scaling_study(g, kernel, intensity, SCALING_LAMBDAS, 2, regime, budget, seed)
            ok = abs(study.fit.slope - float(study.predicted)) <= tol
            return ok, (f"slope {study.fit.slope:.4f} +- {study.fit.stderr:.4f}, predicted "
                        f"{study.predicted} (tolerance {tol})")
        out.append(_timed("scaling", f"{name} kappa2 slope", check))
    regimes = [("dilute", RegimeSpec("dilute", 0.0)), ("dilute alpha=1/4", RegimeSpec("dilute", 0.25)),
               ("sparse alpha=3/2", RegimeSpec("sparse", 1.5)),
               ("rgg dense", RegimeSpec("rgg_dense", radius_exponent=0.25)),
               ("rgg thermodynamic", RegimeSpec("rgg_thermodynamic", radius_exponent=0.5)),
               ("rgg sparse", RegimeSpec("rgg_sparse", radius_exponent=0.75))]
    from .experiments import symbolic_leading_exponent
    for label, regime in regimes:
        def scan(regime=regime):
            details, ok = [], True
            for g in (PatternGraph.edge(), PatternGraph.path(3)):
                for n in (1, 2, 3):
                    pred, _ = predicted_cumulant_exponent(g, regime, n)
                    got = symbolic_leading_exponent(g, n, regime)
                    ok &= pred == got
                    details.append(f"{g.name} n={n}: {got} vs {pred}")
            return ok, "; ".join(details)
        out.append(_timed("scaling", f"symbolic degree scan, {label}", scan))
    return out


# -- 7. normality trend -----------------------------------------------------------------

def suite_normality(replicates: int = 500, pairs: int = 10, seed: int = 7, budget: int = 200_000) -> list[CheckResult]:
    g = PatternGraph.triangle()
    kernel = KernelSpec("boolean", R=0.1)
    base = IntensitySpec("scaled_intensity", UNIT_TORUS, 25.0)
    moments = {}
    for lam in (25.0, 200.0):
        reps = cumulant_reports(g, kernel, base.with_lam(lam), [1, 2], budget, seed)
        moments[lam] = (nominal(reps[0].value), math.sqrt(nominal(reps[1].value)))
    wins, rows = 0, []
    start = time.perf_counter()
    for k in range(pairs):
        dist = {}
        for lam in (25.0, 200.0):
            run = run_replicates(base.with_lam(lam), kernel, g, replicates, seed=1000 * seed + k)
            dist[lam] = ks_distance_to_normal(run.counts, *moments[lam])
        wins += dist[200.0] < dist[25.0]
        rows.append(f"{dist[25.0]:.3f}>{dist[200.0]:.3f}" if dist[200.0] < dist[25.0]
                    else f"{dist[25.0]:.3f}<={dist[200.0]:.3f}")
    pred = rate_prediction(g, RegimeSpec("dilute"))
    return [
        CheckResult("normality", "triangle KS distance decreases from lambda=25 to 200", wins >= 8,
                    f"{wins}/{pairs} seed pairs ({', '.join(rows)})", round(time.perf_counter() - start, 3)),
        CheckResult("normality", "triangle dilute ks_rate", pred.ks_rate == Fraction(1, 10), f"{pred.ks_rate}"),
    ]


# -- 8. rates -------------------------------------------------------------------------

def suite_rates() -> list[CheckResult]:
    out = []
    ok, bad = True, []
    graphs = [PatternGraph.edge(), PatternGraph.path(3), PatternGraph.triangle(), PatternGraph.star(3),
              PatternGraph.cycle(4), PatternGraph.complete(4), PatternGraph.path(6)]
    for g in graphs:
        pred = rate_prediction(g, RegimeSpec("dilute"))
        if pred.ks_rate != Fraction(1, 4 * g.r - 2) or pred.gamma != g.r - 1:
            ok = False
            bad.append(g.name)
    out.append(CheckResult("rates", "dilute ks_rate = 1/(4r-2)", ok, f"graphs checked: {len(graphs)}; bad: {bad}"))
    ok, bad = True, []
    checked = 0
    for g in (PatternGraph.edge(), PatternGraph.path(3), PatternGraph.star(3), PatternGraph.path(5)):
        r = g.r
        top = {2: "1.99", 3: "1.49", 4: "1.33", 5: "1.24"}[r]
        for text in ("1", "1.1", "1.2", top):
            alpha = Fraction(text)
            pred = rate_prediction(g, RegimeSpec("sparse", float(text)))
            expect = (alpha - (alpha - 1) * r) / (4 * r - 2)
            checked += 1
            if pred.ks_rate != expect:
                ok = False
                bad.append((g.name, str(alpha), str(pred.ks_rate)))
    out.append(CheckResult("rates", "sparse tree ks_rate = (alpha-(alpha-1)r)/(4r-2)", ok,
                           f"{checked} cases; bad: {bad}"))
    refusals = []
    for g, alpha in ((PatternGraph.triangle(), 1.4), (PatternGraph.cycle(4), 1.0), (PatternGraph.complete(4), 1.2)):
        try:
            rate_prediction(g, RegimeSpec("sparse", alpha))
            refusals.append(False)
        except RegimeError as exc:
            refusals.append("not a tree" in str(exc))
    out.append(CheckResult("rates", "sparse non-tree inputs refused", all(refusals), f"{sum(refusals)}/3 refused"))
    return out


# -- 9. determinism ------------------------------------------------------------------

def suite_determinism(seed: int = 9) -> list[CheckResult]:
    from .cli import main
    import tempfile
    from pathlib import Path
    out = []
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for cmd, extra in (("simulate", ["--graph", "triangle", "--lam", "60", "--replicates", "200"]),
                           ("cumulant", ["--graph", "triangle", "--lam", "30", "--order", "2",
                                         "--mc-samples", "20000"])):
            files = []
            for k in range(2):
                path = tmp / f"{cmd}{k}.csv"
                code = main([cmd, *extra, "--seed", str(seed), "--workers", "1", "--csv", str(path),
                             "--json", str(tmp / f"{cmd}{k}.json")])
                files.append(path.read_bytes() if code == 0 else None)
            same = files[0] is not None and files[0] == files[1]
            out.append(CheckResult("determinism", f"{cmd} CSV byte-identical", same,
                                   f"{len(files[0] or b'')} bytes"))
    return out


SUITES: dict[str, Callable[[], list[CheckResult]]] = {
    "counting": suite_counting,
    "removable": suite_removable,
    "identity": suite_identity,
    "consistency": suite_consistency,
    "simulation": suite_simulation,
    "scaling": suite_scaling,
    "normality": suite_normality,
    "rates": suite_rates,
    "determinism": suite_determinism,
}


def run_suite(name: str) -> list[CheckResult]:
    if name == "all":
        return [res for fn in SUITES.values() for res in fn()]
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()
