#!/usr/bin/env python3
"""Conjugacy residuals between the primal and dual value functions on grids in K and L."""

import argparse
from dataclasses import dataclass

import numpy as np

from dualstab.market import EndowmentBundle, call_payoff, trinomial_market
from dualstab.optimizer import conjugacy_check
from dualstab.utility import UtilityFunction, normalize


@dataclass
class ConjugacySettings:
    size: int = 5
    utility: str = "log"
    alpha: float = 0.5


def parse_args(argv=None) -> ConjugacySettings:
    d = ConjugacySettings()
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--size", type=int, default=d.size, help="points per grid axis")
    p.add_argument("--utility", choices=("log", "power"), default=d.utility)
    p.add_argument("--alpha", type=float, default=d.alpha)
    return ConjugacySettings(**vars(p.parse_args(argv)))


def main(argv=None) -> int:
    s = parse_args(argv)
    U = UtilityFunction.log() if s.utility == "log" else normalize(UtilityFunction.power(s.alpha))
    market = trinomial_market()
    f = EndowmentBundle(call_payoff(market, 1.0)[None, :], ("call",))
    K = [(x, [q]) for x in np.linspace(0.6, 2.0, s.size) for q in np.linspace(-0.6, 0.6, s.size)]
    L = [(y, [y * p]) for y in np.linspace(0.6, 2.0, s.size) for p in np.linspace(0.05, 0.28, s.size)]
    rep = conjugacy_check(market, market.P, U, K, L, f)
    print(f"primal residual  {rep.primal_residual:.3e}")
    print(f"dual residual    {rep.dual_residual:.3e}")
    print(f"weak duality     {rep.weak_violation:.3e}")
    print(f"first-order link {rep.link_residual:.3e}")
    return 0 if rep.residual < 1e-6 else 1


if __name__ == "__main__":
    raise SystemExit(main())
