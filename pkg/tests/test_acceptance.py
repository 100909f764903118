"""Acceptance suite: one check per criterion, each reported as PASS/FAIL.

Under pytest the verdict lines are printed in the terminal summary; run
``python tests/test_acceptance.py`` to print them directly.
"""

import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

sys.path.insert(0, str(Path(__file__).resolve().parent))

import corpus  # noqa: E402
from dualstab.convex import check_epi_convergence, epsilon_extension, perspective  # noqa: E402
from dualstab.harness import (  # noqa: E402
    beta_m,
    constant_family,
    counterexample_experiment,
    drift_family,
    run_stability_experiment,
    ui_condition_report,
)
from dualstab.market import binomial_market, martingale_measures  # noqa: E402
from dualstab.optimizer import conjugacy_check, first_order_link_check, solve_dual, solve_primal  # noqa: E402
from dualstab.oracles import brute_force_primal, brute_force_strategy  # noqa: E402
from dualstab.utility import UtilityFunction, normalize, numeric_conjugate  # noqa: E402


@dataclass
class Verdict:
    number: int
    passed: bool
    detail: str
    seconds: float
    limit: float = math.inf

    @property
    def line(self) -> str:
        status = "PASS" if self.passed and self.seconds < self.limit else "FAIL"
        lim = "" if math.isinf(self.limit) else f" (limit {self.limit:g}s)"
        return f"criterion {self.number}: {status} {self.detail} [{self.seconds:.2f}s{lim}]"


RESULTS: Dict[int, Verdict] = {}
CHECKS: Dict[int, Callable[[], Verdict]] = {}


def criterion(number: int, limit: float = math.inf):
    def wrap(fn):
        def run():
            t0 = time.perf_counter()
            ok, detail = fn()
            v = Verdict(number, bool(ok), detail, time.perf_counter() - t0, limit)
            RESULTS[number] = v
            return v

        CHECKS[number] = run
        return run

    return wrap


LOG = UtilityFunction.log()
SQRT = normalize(UtilityFunction.power(0.5))


def tuned_family(m):
    return drift_family(m.P, [0.05, 0.0, -0.05], 0.5, 0.55, 1.0, [0.5], 1.0, [0.15], point_drift=0.5)


@criterion(1, limit=1.0)
def closed_form():
    m = binomial_market()
    sol = solve_primal(m, m.P, LOG, 1.0)
    u_err = abs(sol.value - 0.5 * math.log(9 / 8))
    x_err = float(np.max(np.abs(sol.wealth - [1.5, 0.75])))
    v_err = max(abs(solve_dual(m, m.P, LOG, y).value - (-math.log(y) - 1 + 0.5 * math.log(9 / 8)))
                for y in (0.25, 0.5, 1.0, 2.0, 4.0))
    worst = max(u_err, x_err, v_err)
    return worst < 1e-9, f"max error {worst:.2e} (u {u_err:.1e}, X {x_err:.1e}, v {v_err:.1e})"


def _conjugacy_reports():
    m, f = corpus.trinomial_call()
    K = [(x, [q]) for x in np.linspace(0.6, 2.0, 5) for q in np.linspace(-0.6, 0.6, 5)]
    L = [(y, [y * p]) for y in np.linspace(0.6, 2.0, 5) for p in np.linspace(0.05, 0.28, 5)]
    poly = martingale_measures(m)
    return {name: conjugacy_check(m, m.P, U, K, L, f, poly) for name, U in (("log", LOG), ("power0.5", SQRT))}


@criterion(2, limit=10.0)
def conjugacy():
    reps = _conjugacy_reports()
    worst = max(r.residual for r in reps.values())
    ok = worst < 1e-6 and all(r.value_finite for r in reps.values())
    parts = ", ".join(f"{k} {r.residual:.1e}" for k, r in reps.items())
    return ok, f"max conjugacy residual {worst:.2e} on 5x5 grids ({parts})"


@criterion(3)
def first_order_link():
    worst, count = 0.0, 0
    for _, m, f, points in corpus.small_markets():
        poly = martingale_measures(m)
        for U in corpus.utilities().values():
            for x, q in points:
                sol = solve_primal(m, m.P, U, x, q, f, poly)
                d = solve_dual(m, m.P, U, sol.y, sol.r, f, poly)
                qv = np.zeros(f.N) if q is None else np.asarray(q, float)
                worst = max(worst, first_order_link_check(sol, d, U, qv, f))
                count += 1
    m, f = corpus.trinomial_call()
    for U in (LOG, SQRT):
        for x, q in ((0.8, 0.3), (1.5, -0.4), (2.0, 0.6)):
            sol = solve_primal(m, m.P, U, x, [q], f)
            d = solve_dual(m, m.P, U, sol.y, sol.r, f)
            worst = max(worst, first_order_link_check(sol, d, U, [q], f))
            count += 1
    return worst < 1e-7, f"max |Y - U'(g)| = {worst:.2e} over {count} matched solves"


@criterion(4)
def brute_force():
    worst, lower_ok, count = 0.0, True, 0
    for _, m, f, points in corpus.small_markets():
        poly = martingale_measures(m)
        for U in corpus.utilities().values():
            for x, q in points:
                val = solve_primal(m, m.P, U, x, q, f, poly).value
                grid, _ = brute_force_strategy(m, m.P, U, x, q, f)
                budget, _ = brute_force_primal(m, m.P, U, x, q, f, poly)
                worst = max(worst, abs(val - grid))
                lower_ok &= budget <= val + 1e-9
                count += 1
    return worst < 1e-5 and lower_ok, f"max |u - grid search| = {worst:.2e} over {count} instances; payoff-space search never exceeds u: {lower_ok}"


def _stability_report():
    m, f = corpus.trinomial_call()
    return run_stability_experiment(m, f, tuned_family(m), n_max=1000)


@criterion(5, limit=60.0)
def values_converge():
    rep = _stability_report()
    last, lim = rep.records[-1], rep.limit
    devs = {
        "u": abs(last["u_n"] - lim["u"]),
        "v": abs(last["v_n"] - lim["v"]),
        "du_dx": abs(last["du_dx"] - lim["du_dx"]),
        "dv_dy": abs(last["dv_dy"] - lim["dv_dy"]),
    }
    worst = max(devs.values())
    return worst < 1e-4, "n=1000 deviations " + ", ".join(f"{k} {v:.1e}" for k, v in devs.items())


@criterion(6)
def kyfan_converges():
    last = _stability_report().records[-1]
    ok = last["kyfan_X"] < 1e-4 and last["kyfan_Y"] < 1e-4
    return ok, f"n=1000 Ky-Fan X {last['kyfan_X']:.1e}, Y {last['kyfan_Y']:.1e}"


@criterion(7)
def hausdorff_inclusion():
    rep = _stability_report()
    n0 = rep.details["n_eps"]["0.001"]
    ok = n0 is not None and n0 <= 1000 and rep.verdicts["hausdorff"]
    return ok, f"one-sided Hausdorff below 1e-3 from n0 = {n0} (ladder {rep.details['n_eps']})"


@criterion(8)
def semicontinuity():
    rep = _stability_report()
    lo, hi = rep.details["liminf_gap"], rep.details["limsup_gap"]
    ok = rep.verdicts["liminf"] and rep.verdicts["limsup"] and lo <= 1e-4 and hi <= 1e-4
    return ok, f"liminf shortfall {lo:.1e}, limsup excess {hi:.1e}"


@criterion(9)
def ui_conditions():
    m, f = corpus.trinomial_call()
    capped = normalize(UtilityFunction.power(-1.0))
    item3 = ui_condition_report(m, f, constant_family(capped, 1.0, [0.5], 1.0, [0.15], m.n_atoms)).bounded_above
    h = ui_condition_report(m, f, tuned_family(m)).holder
    item4 = h is not None and h.passed and 1 < h.gamma < h.p_hat
    rae = ui_condition_report(m, f, constant_family(LOG, 1.0, [0.5], 1.0, [0.15], m.n_atoms))
    item5 = rae.rae_holds and rae.rae_delta < 1
    detail = (f"item3 {item3}; item4 {item4} (p_hat {h.p_hat:g}, q_hat {h.q_hat:g}, gamma {h.gamma:.4g}); "
              f"RAE {item5} (delta {rae.rae_delta:.3g} from x0 {rae.rae_x0:.3g})")
    return item3 and item4 and item5, detail


@criterion(10, limit=300.0)
def counterexample():
    fixed = counterexample_experiment(fixed_m=6)
    diag = counterexample_experiment(levels=range(2, 13))
    ky_fixed = float(fixed.column("kyfan")[-1])
    last = diag.rows[-1]
    ok = ky_fixed < 1e-3 and last["kyfan"] > 0.05 and last["tv"] < 0.01
    return ok, (f"fixed m=6: Ky-Fan {ky_fixed:.1e} at n={fixed.rows[-1]['n']}; "
                f"diagonal m={last['m']}: Ky-Fan {last['kyfan']:.3f}, TV {last['tv']:.4f}")


def _numeric_biconjugate(V, x):
    """``inf_y {V(y) + x y}`` by log-grid search plus bounded refinement."""
    grid = np.geomspace(1e-8, 1e8, 4001)
    vals = V(grid) + x * grid
    j = int(np.argmin(vals))
    res = minimize_scalar(lambda t: float(V(np.exp(t))) + x * np.exp(t),
                          bounds=(np.log(grid[j - 1]), np.log(grid[j + 1])), method="bounded",
                          options={"xatol": 1e-13})
    return min(res.fun, vals[j])


@criterion(11)
def convex_toolkit():
    y = np.geomspace(0.05, 20, 60)
    rt = 0.0
    for U in corpus.utilities().values():
        V = U.conjugate()
        rt = max(rt, float(np.max(np.abs(V(y) - numeric_conjugate(U, y)))))
        rt = max(rt, max(abs(_numeric_biconjugate(V, x) - float(U(x))) for x in y))
    rng = np.random.default_rng(2024)
    Ve = epsilon_extension(LOG.conjugate(), 0.5)
    a, b = rng.uniform(0.01, 5, (1000, 2)), rng.uniform(0.01, 5, (1000, 2))
    mid = 0.5 * (a + b)
    slack = float(np.min(0.5 * (perspective(Ve, a[:, 0], a[:, 1]) + perspective(Ve, b[:, 0], b[:, 1]))
                         - perspective(Ve, mid[:, 0], mid[:, 1])))
    betas = [beta_m(LOG.conjugate(), m) for m in range(1, 11)]
    beta_ok = all(bm > 0 for bm in betas)
    V = LOG.conjugate()
    probe = np.geomspace(0.2, 5, 30)
    idx = [1, 10, 100, 1000, 10**4, 10**5, 10**6]
    const = check_epi_convergence(lambda n: V, V, probe, idx).verdict
    unif = check_epi_convergence(lambda n: (lambda t: V(t) + 1.0 / n), V, probe, idx + [10**7]).verdict
    alpha = 0.5
    fam = lambda n: normalize(UtilityFunction.power(alpha - 0.2 / n))
    lim = normalize(UtilityFunction.power(alpha))
    primal = check_epi_convergence(lambda n: (lambda t, U=fam(n): -U(t)), lambda t: -lim(t), probe, idx, tol=1e-4).verdict
    dual = check_epi_convergence(lambda n: fam(n).conjugate(), lim.conjugate(), probe, idx, tol=1e-4).verdict
    commute = primal == dual
    ok = rt < 1e-7 and slack >= -1e-12 and beta_ok and const and unif and commute and primal
    detail = (f"round-trip {rt:.1e}; midpoint slack {slack:.1e}; min beta_m {min(betas[1:]):.2e} (beta_1 = inf, C_1 empty); "
              f"epi constant {const}, uniform {unif}, conjugation commutes {commute}")
    return ok, detail


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number):
    v = CHECKS[number]()
    assert v.passed, v.line
    assert v.seconds < v.limit, v.line


if __name__ == "__main__":
    failed = 0
    for k in sorted(CHECKS):
        v = CHECKS[k]()
        print(v.line, flush=True)
        failed += not (v.passed and v.seconds < v.limit)
    sys.exit(1 if failed else 0)
