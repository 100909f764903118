#!/usr/bin/env python3
"""Instability example: diagonal refinement versus a fixed lattice level."""

import argparse
from dataclasses import dataclass

from dualstab.harness import SpikeDensity, counterexample_experiment


@dataclass
class CounterexampleSettings:
    m_max: int = 12
    fixed_m: int = 6
    eps_scale: float = 0.2
    width: float = 0.5
    profile: str = "indicator"
    alpha: float = 0.5


def parse_args(argv=None) -> CounterexampleSettings:
    d = CounterexampleSettings()
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--m-max", type=int, default=d.m_max)
    p.add_argument("--fixed-m", type=int, default=d.fixed_m)
    p.add_argument("--eps-scale", type=float, default=d.eps_scale)
    p.add_argument("--width", type=float, default=d.width)
    p.add_argument("--profile", choices=("indicator", "gaussian"), default=d.profile)
    p.add_argument("--alpha", type=float, default=d.alpha)
    return CounterexampleSettings(**{k.replace("-", "_"): v for k, v in vars(p.parse_args(argv)).items()})


def main(argv=None) -> int:
    s = parse_args(argv)
    spike = SpikeDensity(eps_scale=s.eps_scale, width=s.width, profile=s.profile)
    diag = counterexample_experiment(levels=range(2, s.m_max + 1), spike=spike, alpha=s.alpha)
    fixed = counterexample_experiment(fixed_m=s.fixed_m, spike=spike, alpha=s.alpha)
    print("# diagonal n(m) = m")
    print(diag.to_csv(), end="")
    print(f"# fixed m = {s.fixed_m}")
    print(fixed.to_csv(), end="")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
