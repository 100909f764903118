"""Command-line front end.

Subcommands: ``solve``, ``stability``, ``prices``, ``counterexample`` and
``validate``.  Exit codes: 0 success, 1 stability verdict failed,
2 configuration error, 3 solver error.  Set ``DUALSTAB_LOG`` (e.g. ``DEBUG``)
for progress messages on stderr.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import ConfigError, DualstabError, NoMartingaleMeasure, SolverError
from .harness import counterexample_experiment, run_stability_experiment
from .market import arbitrage_free_price_set, check_n_trad, check_nflvr, martingale_measures, superreplication_cost
from .optimizer import NEWTON_TOL, marginal_price_set, solve_dual, solve_primal, superdifferential_u
from .output import csv_text, json_text, write_all

log = logging.getLogger("dualstab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.section("output").get("dir", "out"))


def _tol(args, cfg: ExperimentConfig) -> float:
    return args.tol if args.tol is not None else float(cfg.section("solver").get("tol", NEWTON_TOL))


def cmd_validate(args, cfg: ExperimentConfig) -> int:
    print(f"{cfg.path}: ok")
    return EXIT_OK


def cmd_prices(args, cfg: ExperimentConfig) -> int:
    market, f = cfg.market, cfg.endowments
    cert = check_nflvr(market)
    if not cert:
        raise NoMartingaleMeasure("market admits arbitrage")
    poly = martingale_measures(market)
    summary: Dict = {"nflvr": True, "vertices": poly.vertices, "n_trad": check_n_trad(market, f, poly)}
    files = {"vertices.csv": poly.to_csv()}
    if f.N:
        ps = arbitrage_free_price_set(market, f, poly)
        lo, hi = ps.bounds()
        summary.update(price_vertices=ps.vertices, price_lower=lo, price_upper=hi, is_open=ps.is_open,
                       superreplication=[superreplication_cost(market, row, poly) for row in f.payoffs])
    files["prices.json"] = json_text(summary)
    write_all(_out_dir(args, cfg), files)
    return EXIT_OK


def cmd_solve(args, cfg: ExperimentConfig) -> int:
    market, f, U = cfg.market, cfg.endowments, cfg.utility
    x, q = cfg.primal_point()
    if args.x is not None:
        x = args.x
    if args.q is not None:
        q = np.asarray(args.q, dtype=float)
    tol = _tol(args, cfg)
    poly = martingale_measures(market)
    primal = solve_primal(market, market.P, U, x, q, f, poly, tol=tol)
    sd = superdifferential_u(market, market.P, U, x, q, f, poly, trace_face=args.trace_face, primal=primal)
    dual = solve_dual(market, market.P, U.conjugate(), sd.y, sd.R[0], f, poly, tol=tol)
    summary = {
        "x": x,
        "q": q,
        "u": primal.value,
        "v": dual.value,
        "du_dx": primal.y,
        "y": sd.y,
        "R": sd.R,
        "marginal_prices": marginal_price_set(sd).points,
        "kkt_residual": primal.kkt_residual,
        "degenerate": primal.metadata["degenerate"],
    }
    if f.N:
        lo, hi = arbitrage_free_price_set(market, f, poly).bounds()
        summary["price_set"] = {"lower": lo, "upper": hi}
    write_all(_out_dir(args, cfg), {
        "solution.csv": primal.to_csv(dual),
        "vertices.csv": poly.to_csv(),
        "summary.json": json_text(summary),
    })
    print(f"u = {primal.value:.12g}  v = {dual.value:.12g}  du/dx = {primal.y:.12g}")
    return EXIT_OK


def cmd_stability(args, cfg: ExperimentConfig) -> int:
    st = cfg.section("stability")
    n_max = args.n_max or int(st.get("n_max", 1000))
    indices = st.get("indices")
    if indices is not None:
        indices = [n for n in indices if n <= n_max]
    family = cfg.family()
    report = run_stability_experiment(
        cfg.market, cfg.endowments, family, n_max, indices,
        value_tol=float(st.get("value_tol", 1e-4)), kyfan_tol=float(st.get("kyfan_tol", 1e-4)),
        tol=_tol(args, cfg),
    )
    summary = report.summary()
    summary["seed"] = cfg.seed
    summary["family"] = {"name": family.name, **family.params}
    write_all(_out_dir(args, cfg), {"stability.csv": report.to_csv(), "verdict.json": json_text(summary)})
    for clause, ok in report.verdicts.items():
        print(f"{clause:10s} {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_counterexample(args, cfg: ExperimentConfig) -> int:
    ce = cfg.section("counterexample")
    mode = ce.get("mode", "diagonal")
    kw = dict(spike=cfg.spike(), alpha=float(ce.get("alpha", 0.5)), x=float(ce.get("x", 1.0)))
    if "n_values" in ce:
        kw["n_values"] = ce["n_values"]
    if mode == "fixed":
        report = counterexample_experiment(fixed_m=int(ce.get("fixed_m", 6)), **kw)
    else:
        levels = ce.get("levels", list(range(2, 13)))
        report = counterexample_experiment(levels=levels, **kw)
    last = report.rows[-1]
    summary = {"mode": mode, "final": last, "seed": cfg.seed}
    write_all(_out_dir(args, cfg), {"counterexample.csv": report.to_csv(), "counterexample.json": json_text(summary)})
    print(f"{mode}: final m={last['m']} n={last['n']} tv={last['tv']:.3g} kyfan={last['kyfan']:.3g}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "stability": cmd_stability,
    "prices": cmd_prices,
    "counterexample": cmd_counterexample,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment configuration (JSON)")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="random seed (overrides config)")
        p.add_argument("--n-max", type=int, dest="n_max", help="largest perturbation index")
        p.add_argument("--tol", type=float, help="Newton residual tolerance")
        if name == "solve":
            p.add_argument("--x", type=float, help="initial wealth")
            p.add_argument("--q", type=float, nargs="*", help="endowment quantities")
            p.add_argument("--trace-face", action="store_true", help="certify the superdifferential")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    level = os.environ.get("DUALSTAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.raw["seed"] = args.seed
        log.info("running %s on %s", args.command, args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, NoMartingaleMeasure) as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DualstabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
