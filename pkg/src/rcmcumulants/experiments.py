"""Experiment drivers shared by the command line and the verification suites."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

from .cumulants import (CumulantReport, LambdaPolynomial, RCMWeight, SymbolicWeight, stable_seed,
                        cumulant_via_connected, diagram_sum, nominal, std_dev)
from .kernels import IntensitySpec, KernelSpec, RegimeSpec, predicted_cumulant_exponent
from .partitions import PatternGraph
from .stats import ScalingFit, fit_scaling_exponent


def rcm_weight(g: PatternGraph, kernel: KernelSpec, intensity: IntensitySpec, budget: int, seed: int,
               exact: bool = False, sampler: str = "auto", tag: str = "rcm") -> RCMWeight:
    return RCMWeight(g, kernel, intensity, budget, stable_seed(seed, intensity.lam, tag), exact, sampler, tag)


def cumulant_reports(g: PatternGraph, kernel: KernelSpec, intensity: IntensitySpec, orders, budget: int,
                     seed: int, exact: bool = False, sampler: str = "auto") -> list[CumulantReport]:
    w = rcm_weight(g, kernel, intensity, budget, seed, exact, sampler, "cumulant")
    return [cumulant_via_connected(n, g, w) for n in orders]


def moment_reports(g: PatternGraph, kernel: KernelSpec, intensity: IntensitySpec, orders, budget: int,
                   seed: int, exact: bool = False, sampler: str = "auto") -> list[dict]:
    w = rcm_weight(g, kernel, intensity, budget, seed, exact, sampler, "moment")
    out = []
    for n in orders:
        res = diagram_sum(n, g.r, w, "nonflat")
        entry = {"order": n, "value": nominal(res.total), "std_error": std_dev(res.total),
                 "partitions": res.partitions}
        if isinstance(res.total, Fraction):
            entry["value_rational"] = str(res.total)
        out.append(entry)
    return out


def symbolic_cumulant(g: PatternGraph, n: int) -> LambdaPolynomial:
    """kappa_n as a formal sum of lambda^|V| c^|E| over connected non-flat diagrams."""
    return diagram_sum(n, g.r, SymbolicWeight(g), "connected_nonflat").total.pruned()


def symbolic_leading_exponent(g: PatternGraph, n: int, regime: RegimeSpec) -> Fraction:
    return symbolic_cumulant(g, n).leading_exponent(regime)


@dataclass
class ScalingStudy:
    order: int
    lambdas: list[float]
    values: list[float]
    errors: list[float]
    fit: ScalingFit
    predicted: Fraction
    predicted_valid: bool
    symbolic_leading: Fraction

    def to_json(self) -> dict:
        return {"order": self.order, "lambdas": self.lambdas, "values": self.values, "errors": self.errors,
                "fit": self.fit.to_json(), "predicted_exponent": str(self.predicted),
                "predicted_exponent_float": float(self.predicted), "regime_conditions_hold": self.predicted_valid,
                "symbolic_leading_exponent": str(self.symbolic_leading)}

    def csv_rows(self) -> list[list]:
        return [[lam, self.order, repr(v), repr(e), str(self.predicted)]
                for lam, v, e in zip(self.lambdas, self.values, self.errors)]


def scaling_study(g: PatternGraph, kernel: KernelSpec, intensity: IntensitySpec, lambdas, order: int,
                  regime: RegimeSpec, budget: int, seed: int, sampler: str = "auto") -> ScalingStudy:
    """kappa_order across a lambda grid, fitted against the predicted exponent."""
    predicted, valid = predicted_cumulant_exponent(g, regime, order)
    values, errors = [], []
    for lam in lambdas:
        w = rcm_weight(g, kernel, intensity.with_lam(lam), budget, seed, False, sampler, "scaling")
        value = cumulant_via_connected(order, g, w, symbolic=False).value
        values.append(nominal(value))
        errors.append(std_dev(value))
    fit = fit_scaling_exponent(lambdas, values, errors if all(e > 0 for e in errors) else None)
    return ScalingStudy(order, list(lambdas), values, errors, fit, predicted, valid,
                        symbolic_leading_exponent(g, order, regime))


def write_rows(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cumulant_csv(reports: list[CumulantReport]) -> str:
    rows = []
    for rep in reports:
        rows.append([rep.order, "total", repr(nominal(rep.value)), repr(rep.std_error)])
        for blocks, v in rep.subtotals_by_block_count.items():
            rows.append([rep.order, blocks, repr(nominal(v)), repr(std_dev(v))])
    return write_rows(["order", "blocks", "value", "std_error"], rows)
