"""Finite-market utility maximization with random endowment and a stability harness."""

from .errors import *  # noqa: F401,F403
from .market import (
    EndowmentBundle,
    FiniteMarket,
    MartingaleMeasurePolytope,
    PriceSet,
    ProbabilityMeasure,
    arbitrage_free_price_set,
    binomial_market,
    build_market,
    call_payoff,
    check_n_trad,
    check_nflvr,
    martingale_measures,
    membership_K,
    membership_L,
    one_period_market,
    put_payoff,
    superreplication_cost,
    trinomial_market,
)
from .optimizer import (
    DualSolution,
    MarginalPriceSet,
    PrimalSolution,
    Superdifferential,
    conjugacy_check,
    first_order_link_check,
    marginal_price_set,
    solve_dual,
    solve_primal,
    superdifferential_u,
)
from .utility import DualFunction, UtilityFunction, conjugate, normalize

__version__ = "0.1.0"
