import itertools

import pytest
from tomaru.tomaru_math import np
from tomaru.prior import BetaPrior, TabulatedPrior, predictive_grid
from tomaru.midpoint import coverage_grid
from tomaru.bounds import log_lower_limit, lower_limit_is_valid
from tomaru.performance import SchemeOnLattice, expected_cost
from tomaru.policy import (
    ALL_SAMPLING,
    ALL_STOPPING,
    Verdict,
    backward_solve,
    default_horizon,
    thresholds,
    decide
)
from tomaru.errors import DomainError, LatticeError

H = 0.05
UNIFORM = BetaPrior.symmetric(1)

# a=1, h=0.05, c=1e-4: no stopping before t=59, stopping certain at t=561
REFERENCE = backward_solve(UNIFORM, H, 1e-4, horizon=600)


def test_reference_limits():
    assert abs(REFERENCE.t_lo - 59) <= 1
    assert abs(REFERENCE.t_up - 561) <= 1


def test_reference_regions_symmetric():
    for t in range(REFERENCE.t_up + 1):
        mask = REFERENCE.grid.sampling[t]
        np.testing.assert_array_equal(mask, mask[::-1])

        r_lo, r_hi, marker = thresholds(REFERENCE.grid, t)
        if marker is None:
            assert r_lo + r_hi == t


def test_thresholds_markers():
    assert thresholds(REFERENCE.grid, 10) == (-1, 11, ALL_SAMPLING)
    assert thresholds(REFERENCE.grid, REFERENCE.t_up) == (None, None, ALL_STOPPING)

    with pytest.raises(LatticeError):
        thresholds(REFERENCE.grid, 601)


def test_no_stopping_before_lower_limit():
    for t in range(REFERENCE.t_lo):
        for s in range(t + 1):
            assert decide(REFERENCE, t, s) == Verdict(False)


def test_decide_stop():
    t = REFERENCE.t_up
    verdict = REFERENCE.decide(t, 200)

    assert verdict.stop
    np.testing.assert_allclose(verdict.estimate, REFERENCE.estimates[t][200])
    np.testing.assert_allclose([verdict.lower, verdict.upper], [verdict.estimate - H, verdict.estimate + H])


def test_decide_outside_lattice():
    with pytest.raises(LatticeError):
        decide(REFERENCE, 3, 4)

    with pytest.raises(LatticeError):
        decide(REFERENCE, 601, 0)


def test_truncated():
    short = REFERENCE.truncated()

    assert short.horizon == REFERENCE.t_up
    assert (short.t_lo, short.t_up) == (REFERENCE.t_lo, REFERENCE.t_up)
    assert short.value == REFERENCE.value
    for t, s in [(0, 0), (100, 40), (REFERENCE.t_up, 3)]:
        assert short.decide(t, s) == REFERENCE.decide(t, s)


def test_unit_cost_stops_at_once():
    policy = backward_solve(UNIFORM, H, 1., horizon=50)

    assert (policy.t_lo, policy.t_up) == (0, 0)
    np.testing.assert_allclose(policy.value, 0.9)
    verdict = policy.decide(0, 0)
    assert verdict.stop
    np.testing.assert_allclose([verdict.estimate, verdict.lower, verdict.upper], [0.5, 0.45, 0.55])


def test_free_sampling_runs_to_horizon():
    policy = backward_solve(UNIFORM, H, 0., horizon=20)
    assert (policy.t_lo, policy.t_up) == (20, 20)


def test_value_monotone_in_cost():
    coverage = coverage_grid(UNIFORM, H, 300)
    predictive = predictive_grid(UNIFORM, 300)
    costs = [3e-4, 1e-3, 1e-2]
    policies = [backward_solve(UNIFORM, H, c, 300, coverage, predictive) for c in costs]

    values = [policy.value for policy in policies]
    assert values == sorted(values)

    # a cheaper sample never shrinks the sampling region
    for cheap, dear in zip(policies, policies[1:]):
        assert cheap.t_lo >= dear.t_lo
        assert cheap.t_up >= dear.t_up
        for t in range(301):
            assert np.all(cheap.grid.sampling[t] | ~dear.grid.sampling[t])


def test_horizon_insensitivity():
    short = backward_solve(UNIFORM, H, 1e-3, horizon=350)
    long = backward_solve(UNIFORM, H, 1e-3, horizon=450)

    assert short.t_up < 350
    assert (short.t_lo, short.t_up) == (long.t_lo, long.t_up)
    for t in range(short.t_up + 1):
        np.testing.assert_array_equal(short.grid.sampling[t], long.grid.sampling[t])
    np.testing.assert_allclose(short.value, long.value, rtol=1e-12)


def test_lower_limit_holds():
    a, h, c = 1, 0.2, 1e-8
    horizon = default_horizon(BetaPrior.symmetric(a), h, c)
    policy = backward_solve(BetaPrior.symmetric(a), h, c, horizon)
    nu = log_lower_limit(c, a, h, horizon)

    assert horizon == 236
    assert nu == 6
    assert lower_limit_is_valid(c, horizon, policy.coverage.comp_coverage[0][0])
    assert policy.t_lo >= nu


def test_default_horizon():
    assert default_horizon(UNIFORM, H, 1e-4) == 1978
    assert default_horizon(UNIFORM, H, 1e-12, max_horizon=100) == 100


def test_default_horizon_needs_beta():
    with pytest.raises(DomainError):
        default_horizon(TabulatedPrior((0., 1.), (1., 1.)), H, 1e-4)

    with pytest.raises(DomainError):
        default_horizon(UNIFORM, H, 0.)


def test_backward_solve_domain():
    with pytest.raises(DomainError):
        backward_solve(UNIFORM, H, -1., horizon=10)

    with pytest.raises(DomainError):
        backward_solve(UNIFORM, 0.6, 1e-3, horizon=10)

    with pytest.raises(DomainError):
        backward_solve(UNIFORM, H, 1e-3, horizon=10, coverage=coverage_grid(UNIFORM, 0.1, 10))


def test_reused_coverage_is_truncated():
    coverage = coverage_grid(UNIFORM, H, 80)
    policy = backward_solve(UNIFORM, H, 1e-3, horizon=40, coverage=coverage)

    assert policy.coverage.horizon == 40
    assert policy.value == backward_solve(UNIFORM, H, 1e-3, horizon=40).value


def test_tabulated_prior_policy():
    beta = backward_solve(UNIFORM, 0.1, 1e-3, horizon=30)
    table = backward_solve(TabulatedPrior((0., 1.), (1., 1.)), 0.1, 1e-3, horizon=30)

    np.testing.assert_allclose(table.value, beta.value, atol=1e-9)
    assert (table.t_lo, table.t_up) == (beta.t_lo, beta.t_up)


def _intervals(t):
    """every interval of {0, ..., t} as a mask, plus the empty set"""
    masks = [np.zeros(t + 1, dtype=bool)]
    for lo in range(t + 1):
        for hi in range(lo, t + 1):
            mask = np.zeros(t + 1, dtype=bool)
            mask[lo:hi + 1] = True
            masks.append(mask)

    return masks


@pytest.mark.parametrize('horizon', [2, 3, 4, 5])
def test_exhaustive_optimality(horizon):
    h, c = 0.1, 0.02
    policy = backward_solve(UNIFORM, h, c, horizon)
    predictive = predictive_grid(UNIFORM, horizon)
    estimates, comp = policy.coverage.estimates, policy.coverage.comp_coverage

    np.testing.assert_allclose(expected_cost(policy.to_scheme(), UNIFORM, c, predictive),
                               policy.value, atol=1e-12)

    last = [np.zeros(horizon + 1, dtype=bool)]
    for regions in itertools.product(*[_intervals(t) for t in range(horizon)]):
        scheme = SchemeOnLattice(horizon, list(regions) + last, estimates, comp, h)
        assert expected_cost(scheme, UNIFORM, c, predictive) >= policy.value - 1e-12
