import pytest

from partialvar import BeliefMeasure, ConstraintSpec, MarketParams, Prior, Utility, solve

BENCH_VALUES = (0.15, 0.25, 0.35)
ROBUST_Q = (0.2, 0.4, 0.4)
L_BENCH = 120.0
BETA = 0.05


@pytest.fixture(scope="session")
def prior():
    return Prior(BENCH_VALUES, [1 / 3] * 3)


@pytest.fixture(scope="session")
def params():
    return MarketParams(r=0.03, sigma=0.2, T=10.0, x0=100.0)


@pytest.fixture(scope="session")
def robust_belief(prior):
    return BeliefMeasure(prior.values, ROBUST_Q)


@pytest.fixture(scope="session")
def var_p(prior):
    return ConstraintSpec.var(BeliefMeasure.of(prior), BETA)


@pytest.fixture(scope="session")
def var_q(robust_belief):
    return ConstraintSpec.var(robust_belief, BETA)


@pytest.fixture(scope="session")
def sol_g3(prior, params, var_p):
    return solve(prior, params, Utility.power(3), var_p, L_BENCH)


@pytest.fixture(scope="session")
def sol_g2(prior, params, var_p):
    return solve(prior, params, Utility.power(2), var_p, L_BENCH)
