"""Small markets shared by the test modules (all with at most four atoms)."""

import numpy as np

from dualstab.market import (
    EndowmentBundle,
    binomial_market,
    build_market,
    call_payoff,
    multinomial_market,
    one_period_market,
    put_payoff,
    trinomial_market,
)
from dualstab.utility import UtilityFunction, normalize


def binomial():
    return binomial_market()


def trinomial():
    return trinomial_market()


def trinomial_call():
    m = trinomial_market()
    return m, EndowmentBundle(call_payoff(m, 1.0)[None, :], ("call",))


def quadrinomial_two_claims():
    m = multinomial_market(1.0, (0.5, 0.8, 1.25, 2.0), (0.1, 0.4, 0.3, 0.2))
    f = EndowmentBundle(np.vstack([call_payoff(m, 1.0), put_payoff(m, 0.9)]), ("call", "put"))
    return m, f


def two_step_binomial():
    return binomial_market(steps=2, p_up=0.4)


def explicit_two_asset():
    spec = {
        "tree": [{"id": "0", "parent": None}] + [{"id": k, "parent": "0"} for k in "abcd"],
        "prices": {"0": [1.0, 1.0], "a": [1.5, 0.8], "b": [0.7, 1.3], "c": [1.2, 1.1], "d": [0.6, 0.7]},
        "atoms": [{"node": k, "probability": p} for k, p in zip("abcd", (0.25, 0.25, 0.3, 0.2))],
    }
    return build_market(spec)


def utilities():
    return {
        "log": UtilityFunction.log(),
        "power0.5": normalize(UtilityFunction.power(0.5)),
        "power-1": normalize(UtilityFunction.power(-1.0)),
    }


def small_markets():
    """``(name, market, bundle, [(x, q), ...])`` for the brute-force corpus."""
    tc_m, tc_f = trinomial_call()
    q4_m, q4_f = quadrinomial_two_claims()
    empty = lambda m: EndowmentBundle.empty(m.n_atoms)
    b = binomial()
    t = trinomial()
    b2 = two_step_binomial()
    e2 = explicit_two_asset()
    return [
        ("binomial", b, empty(b), [(1.0, None), (2.5, None)]),
        ("trinomial", t, empty(t), [(1.0, None), (0.3, None)]),
        ("trinomial_call", tc_m, tc_f, [(1.0, [0.0]), (1.0, [0.5]), (2.0, [-1.0]), (0.5, [2.0])]),
        ("quadrinomial_two_claims", q4_m, q4_f, [(1.0, [0.0, 0.0]), (1.0, [0.3, -0.4])]),
        ("two_step_binomial", b2, empty(b2), [(1.0, None)]),
        ("explicit_two_asset", e2, empty(e2), [(1.0, None)]),
    ]
