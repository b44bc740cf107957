"""Batch command line: enumerate, moment, cumulant, simulate, scaling, rates, verify.

Exit codes: 0 success, 1 a verification gate failed, 2 resource or regime
refusal, 3 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from . import __version__
from .config import ExperimentConfig, RegimeConfig, load_config, parse_graph
from .experiments import (cumulant_csv, cumulant_reports, moment_reports, scaling_study, write_rows)
from .kernels import RegimeError, RegimeSpec, predicted_cumulant_exponent
from .partitions import (BudgetExceededError, SizeLimitError, enumerate_labels, formula_maximal,
                         max_block_count, maximal_count_closed_form)
from .simulate import default_workers, run_replicates
from .stats import DegreesOfFreedomError, k_statistics, ks_distance_to_normal, rate_prediction

log = logging.getLogger("rcmcumulants")

EXIT_OK, EXIT_GATE, EXIT_REFUSED, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _csv_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML experiment file; flags below override it")
    p.add_argument("--graph", help="edge, triangle, path3, cycle(4), star(3), complete(4) or 1-2,2-3")
    p.add_argument("--kernel", dest="kernel_family", choices=["boolean", "rayleigh", "power_law", "constant"])
    p.add_argument("--R", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--scale-base", type=float)
    p.add_argument("--alpha", type=float, help="c_lambda = base * lambda^-alpha")
    p.add_argument("--radius-exponent", type=float)
    p.add_argument("--mode", choices=["scaled_intensity", "growing_window"])
    p.add_argument("--shape", choices=["torus", "box", "ball"])
    p.add_argument("--d", type=int)
    p.add_argument("--side", type=_csv_floats, help="side length(s), comma separated")
    p.add_argument("--lam", type=float)
    p.add_argument("--lams", type=_csv_floats, help="lambda grid, comma separated")
    p.add_argument("--order", type=_csv_ints, help="cumulant orders, comma separated")
    p.add_argument("--regime", choices=["dilute", "sparse", "rgg_dense", "rgg_thermodynamic", "rgg_sparse"])
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--max-cost", type=float)
    p.add_argument("--sampler", choices=["auto", "uniform", "spanning_tree"])
    p.add_argument("--exact", action="store_true", default=None)
    p.add_argument("--csv")
    p.add_argument("--json")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rcm-cumulants", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("enumerate", help="enumerate or count grid partitions")
    p.add_argument("n", type=int)
    p.add_argument("r", type=int)
    p.add_argument("--filter", default="all", choices=["all", "nonflat", "connected", "connected_nonflat"])
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--max-blocks", action="store_true", help="keep partitions with 1+(r-1)n blocks only")
    p.add_argument("--verify-formula", action="store_true", help="compare the maximal count with its closed form")
    p.add_argument("--time-budget", type=float)

    for name, text in (("moment", "E[N_G^n] over non-flat diagrams"),
                       ("cumulant", "kappa_n(N_G) over connected non-flat diagrams"),
                       ("simulate", "simulate the model and count embeddings"),
                       ("scaling", "cumulant growth exponents across a lambda grid")):
        _experiment_flags(sub.add_parser(name, help=text))

    p = sub.add_parser("rates", help="Kolmogorov rate exponents")
    p.add_argument("--graph", default="edge")
    p.add_argument("--regime", default="dilute",
                   choices=["dilute", "sparse", "rgg_dense", "rgg_thermodynamic", "rgg_sparse"])
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--radius-exponent", type=float, default=0.0)
    p.add_argument("--d", type=int, default=2)

    p = sub.add_parser("verify", help="run an acceptance suite")
    p.add_argument("suite")
    p.add_argument("--json")
    return parser


def _overrides(args) -> dict:
    ov = {
        "kernel.family": args.kernel_family, "kernel.R": args.R, "kernel.beta": args.beta, "kernel.p": args.p,
        "kernel.scale.base": args.scale_base, "kernel.scale.alpha": args.alpha,
        "kernel.radius_exponent": args.radius_exponent,
        "intensity.mode": args.mode, "intensity.region.shape": args.shape, "intensity.region.d": args.d,
        "intensity.region.sides": args.side, "intensity.lam": args.lam,
        "lambdas": args.lams, "orders": args.order, "replicates": args.replicates, "seed": args.seed,
        "workers": args.workers, "budget.mc_samples": args.mc_samples, "budget.max_cost": args.max_cost,
        "sampler": args.sampler, "exact": args.exact, "output.csv_path": args.csv, "output.json_path": args.json,
        "command": args.command,
    }
    if args.graph is not None:
        ov["graph.name"] = args.graph
        ov["graph.edges"] = None
    return ov


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config, _overrides(args))
    if args.graph is not None:
        cfg.graph.edges = None
    if args.regime is not None:
        kernel = cfg.kernel
        cfg.regime = RegimeConfig(
            regime=args.regime, alpha=kernel.scale.alpha, radius_base=kernel.R,
            radius_exponent=kernel.radius_exponent, d=cfg.intensity.region.d)
    return cfg


def _emit(cfg: ExperimentConfig | None, result: dict, json_path: str | None, csv_text: str | None = None,
          csv_path: str | None = None) -> None:
    payload = {"artifact_version": __version__, "result": result}
    if cfg is not None:
        payload["config"] = cfg.model_dump(mode="json")
    text = json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"
    if json_path:
        Path(json_path).write_text(text)
    else:
        sys.stdout.write(text)
    if csv_text is not None and csv_path:
        Path(csv_path).write_text(csv_text)


def cmd_enumerate(args) -> int:
    n, r = args.n, args.r
    target = max_block_count(n, r) if args.max_blocks else None
    count = 0
    out = sys.stdout
    for labels in enumerate_labels(n, r, args.filter, args.time_budget):
        if target is not None and max(labels) + 1 != target:
            continue
        count += 1
        if not args.count_only:
            out.write(",".join(map(str, labels)) + "\n")
    result = {"n": n, "r": r, "filter": args.filter, "max_blocks": args.max_blocks, "count": count}
    code = EXIT_OK
    if args.verify_formula:
        if not (args.filter == "connected_nonflat" and args.max_blocks):
            raise UsageError("--verify-formula needs --filter connected_nonflat --max-blocks")
        result["formula"] = formula_maximal(n, r)
        result["closed_form_alternative"] = maximal_count_closed_form(n, r)
        result["formula_matches"] = count == result["formula"]
        code = EXIT_OK if result["formula_matches"] else EXIT_GATE
    print(json.dumps(result, sort_keys=True))
    return code


def _graph(cfg: ExperimentConfig):
    return cfg.graph.build()


def cmd_moment(cfg: ExperimentConfig) -> int:
    g = _graph(cfg)
    rows = moment_reports(g, cfg.kernel.build(), cfg.intensity.build(), cfg.orders, cfg.budget.mc_samples,
                          cfg.seed, cfg.exact, cfg.sampler)
    csv_text = write_rows(["order", "value", "std_error"], [[e["order"], repr(e["value"]), repr(e["std_error"])]
                                                            for e in rows])
    _emit(cfg, {"moments": rows}, cfg.output.json_path, csv_text, cfg.output.csv_path)
    return EXIT_OK


def cmd_cumulant(cfg: ExperimentConfig) -> int:
    g = _graph(cfg)
    reports = cumulant_reports(g, cfg.kernel.build(), cfg.intensity.build(), cfg.orders, cfg.budget.mc_samples,
                               cfg.seed, cfg.exact, cfg.sampler)
    regime = cfg.regime_spec()
    result = []
    for rep in reports:
        entry = rep.to_json()
        entry["leading_exponent"] = str(rep.symbolic_exponents.leading_exponent(regime))
        entry["regime"] = regime.to_json()
        result.append(entry)
    _emit(cfg, {"cumulants": result}, cfg.output.json_path, cumulant_csv(reports), cfg.output.csv_path)
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig) -> int:
    g = _graph(cfg)
    intensity = cfg.intensity.build()
    workers = cfg.workers or default_workers()
    run = run_replicates(intensity, cfg.kernel.build(), g, cfg.replicates, cfg.seed, workers,
                         cfg.budget.max_cost)
    log.info("simulated %d replicates in %.2fs", run.replicates, run.wall_time)
    summary = run.summary()
    summary.pop("config")
    try:
        summary["k_statistics"] = k_statistics(run.counts).to_json()
        summary["ks_distance_sample_standardized"] = ks_distance_to_normal(run.counts)
        summary["standardization"] = "sample"
    except (DegreesOfFreedomError, ValueError) as exc:
        summary["k_statistics"] = None
        summary["note"] = str(exc)
    _emit(cfg, summary, cfg.output.json_path, run.to_csv(), cfg.output.csv_path)
    return EXIT_OK


def cmd_scaling(cfg: ExperimentConfig) -> int:
    g = _graph(cfg)
    regime = cfg.regime_spec()
    studies = []
    for n in cfg.orders:
        _, valid = predicted_cumulant_exponent(g, regime, n)
        if not valid:
            raise RegimeError(f"the side conditions of the {regime.regime} regime fail for "
                              f"{g.name} at order {n}; no exponent prediction to compare against")
        studies.append(scaling_study(g, cfg.kernel.build(), cfg.intensity.build(), cfg.lambdas, n, regime,
                                     cfg.budget.mc_samples, cfg.seed, cfg.sampler))
    rows = [row for s in studies for row in s.csv_rows()]
    csv_text = write_rows(["lambda", "order", "estimate", "stderr", "predicted_exponent"], rows)
    _emit(cfg, {"regime": regime.to_json(), "studies": [s.to_json() for s in studies]},
          cfg.output.json_path, csv_text, cfg.output.csv_path)
    return EXIT_OK


def cmd_rates(args) -> int:
    g = parse_graph(args.graph)
    regime = RegimeSpec(args.regime, args.alpha, 1.0, args.radius_exponent, args.d)
    pred = rate_prediction(g, regime)
    _emit(None, {"graph": g.name, "r": g.r, **pred.to_json()}, None)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suite
    if args.suite != "all" and args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from all, {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_USAGE
    results = run_suite(args.suite)
    for res in results:
        print(res.line())
    passed = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    if args.json:
        Path(args.json).write_text(json.dumps([r.to_json() for r in results], indent=2) + "\n")
    return EXIT_OK if passed else EXIT_GATE


COMMANDS = {"moment": cmd_moment, "cumulant": cmd_cumulant, "simulate": cmd_simulate, "scaling": cmd_scaling}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "enumerate":
            return cmd_enumerate(args)
        if args.command == "rates":
            return cmd_rates(args)
        if args.command == "verify":
            return cmd_verify(args)
        return COMMANDS[args.command](_config(args))
    except (SizeLimitError, BudgetExceededError, RegimeError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ValidationError, UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
