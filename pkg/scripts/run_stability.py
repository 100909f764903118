#!/usr/bin/env python3
"""Run the drift-family stability experiment on the trinomial market with a call.

Prints the per-index table and the clause verdicts; optionally writes the CSV.
"""

import argparse
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

from dualstab.harness import drift_family, run_stability_experiment
from dualstab.market import EndowmentBundle, call_payoff, trinomial_market


@dataclass
class StabilitySettings:
    zeta: List[float] = field(default_factory=lambda: [0.05, 0.0, -0.05])
    alpha: float = 0.5
    alpha_bar: float = 0.55
    x: float = 1.0
    q: float = 0.5
    y: float = 1.0
    r: float = 0.15
    point_drift: float = 0.5
    n_max: int = 1000


def parse_args(argv=None):
    d = StabilitySettings()
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--zeta", type=float, nargs=3, default=d.zeta)
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--alpha-bar", type=float, default=d.alpha_bar)
    p.add_argument("--point-drift", type=float, default=d.point_drift)
    p.add_argument("--n-max", type=int, default=d.n_max)
    p.add_argument("--csv", type=Path, help="write the per-index table here")
    a = p.parse_args(argv)
    s = StabilitySettings(zeta=a.zeta, alpha=a.alpha, alpha_bar=a.alpha_bar, point_drift=a.point_drift, n_max=a.n_max)
    return s, a.csv


def main(argv=None) -> int:
    s, csv_path = parse_args(argv)
    market = trinomial_market()
    f = EndowmentBundle(call_payoff(market, 1.0)[None, :], ("call",))
    fam = drift_family(market.P, s.zeta, s.alpha, s.alpha_bar, s.x, [s.q], s.y, [s.r], s.point_drift)
    report = run_stability_experiment(market, f, fam, n_max=s.n_max)
    text = report.to_csv()
    print(text, end="")
    if csv_path:
        csv_path.write_text(text)
    for clause, ok in report.verdicts.items():
        print(f"{clause:10s} {'PASS' if ok else 'FAIL'}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
