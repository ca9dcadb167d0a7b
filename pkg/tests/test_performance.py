import pytest
from tomaru.tomaru_math import np, composite_gauss_legendre
from tomaru.prior import BetaPrior, marginal_pmf_grid, predictive_grid
from tomaru.midpoint import coverage_grid, expected_comp_coverage
from tomaru.policy import backward_solve
from tomaru.schemes import fss_scheme
from tomaru.performance import (
    SchemeOnLattice,
    PerformanceReport,
    default_theta_grid,
    expected_samples_given_theta,
    expected_samples_bayes,
    miss_prob_given_theta,
    miss_prob_bayes,
    expected_cost,
    worst_case_miss,
    evaluate,
    mix_reports,
    simulate,
    missed
)
from tomaru.errors import DomainError

H = 0.05
UNIFORM = BetaPrior.symmetric(1)

STOP_AT_ZERO = SchemeOnLattice(0, [np.array([False])], [np.array([0.5])], [np.array([0.9])], H, name='stop')

REFERENCE = backward_solve(UNIFORM, H, 1e-4, horizon=600)
REFERENCE_SCHEME = REFERENCE.truncated().to_scheme()

# short policy used where the per-theta quantities are integrated exactly
SMALL = backward_solve(UNIFORM, 0.1, 1e-3, horizon=40)
SMALL_SCHEME = SMALL.to_scheme()


def test_stop_at_zero():
    assert expected_samples_given_theta(STOP_AT_ZERO, 0.3) == 0
    assert expected_samples_bayes(STOP_AT_ZERO, UNIFORM) == 0
    assert miss_prob_given_theta(STOP_AT_ZERO, 0.5) == 0
    assert miss_prob_given_theta(STOP_AT_ZERO, 0.9) == 1
    np.testing.assert_allclose(miss_prob_bayes(STOP_AT_ZERO, UNIFORM), 0.9)


def test_stop_at_zero_worst_case():
    theta, miss = worst_case_miss(STOP_AT_ZERO, np.linspace(0, 1, 101))
    assert (theta, miss) == (0., 1.)


def test_constant_miss_tie_break():
    theta, miss = worst_case_miss(STOP_AT_ZERO, [0.46, 0.5, 0.54])
    assert (theta, miss) == (0.46, 0.)


def test_fixed_sample_size():
    scheme = fss_scheme(UNIFORM, H, 10)
    theta = np.linspace(0, 1, 11)

    np.testing.assert_allclose(expected_samples_given_theta(scheme, theta), 10)
    np.testing.assert_allclose(expected_samples_bayes(scheme, UNIFORM), 10)


def test_fixed_sample_size_miss():
    grid = coverage_grid(UNIFORM, H, 40)
    expected = expected_comp_coverage(grid, marginal_pmf_grid(UNIFORM, 40))

    for n in [0, 5, 40]:
        np.testing.assert_allclose(miss_prob_bayes(fss_scheme(UNIFORM, H, n, grid), UNIFORM), expected[n],
                                   atol=1e-13)


def test_scheme_must_stop_at_horizon():
    with pytest.raises(DomainError):
        SchemeOnLattice(0, [np.array([True])], [np.array([0.5])], [np.array([0.9])], H)

    with pytest.raises(DomainError):
        SchemeOnLattice(1, [np.array([True])], [np.array([0.5])], [np.array([0.9])], H)


def test_bayes_needs_coverage():
    scheme = SchemeOnLattice(0, [np.array([False])], [np.array([0.5])], None, H)
    with pytest.raises(DomainError):
        miss_prob_bayes(scheme, UNIFORM)


def test_worst_case_empty_grid():
    with pytest.raises(DomainError):
        worst_case_miss(STOP_AT_ZERO, [])


def test_broadcast_matches_scalar():
    theta = np.array([0.1, 0.35, 0.8])
    vector = miss_prob_given_theta(SMALL_SCHEME, theta)
    scalar = [miss_prob_given_theta(SMALL_SCHEME, th) for th in theta]
    np.testing.assert_allclose(vector, scalar)

    vector = expected_samples_given_theta(SMALL_SCHEME, theta)
    scalar = [expected_samples_given_theta(SMALL_SCHEME, th) for th in theta]
    np.testing.assert_allclose(vector, scalar)


def _piecewise_nodes(scheme):
    """quadrature exact for functions polynomial between the interval end points"""
    breaks = {0., 1.}
    for layer in scheme.estimates:
        breaks.update(np.clip(np.concatenate([layer - scheme.h, layer + scheme.h]), 0, 1).tolist())
    breaks = np.array(sorted(breaks))

    theta, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi > lo:
            x, w = composite_gauss_legendre(lo, hi, 1, scheme.horizon // 2 + 2)
            theta.append(x)
            weights.append(w)

    return np.concatenate(theta), np.concatenate(weights)


def test_bayes_is_prior_average():
    theta, weights = _piecewise_nodes(SMALL_SCHEME)

    np.testing.assert_allclose(np.sum(weights * expected_samples_given_theta(SMALL_SCHEME, theta)),
                               expected_samples_bayes(SMALL_SCHEME, UNIFORM), atol=1e-6)
    np.testing.assert_allclose(np.sum(weights * miss_prob_given_theta(SMALL_SCHEME, theta)),
                               miss_prob_bayes(SMALL_SCHEME, UNIFORM), atol=1e-6)


def test_optimal_cost_equals_value():
    np.testing.assert_allclose(expected_cost(REFERENCE_SCHEME, UNIFORM, REFERENCE.c), REFERENCE.value, atol=1e-9)
    np.testing.assert_allclose(expected_cost(REFERENCE.to_scheme(), UNIFORM, REFERENCE.c), REFERENCE.value,
                               atol=1e-9)


def test_expected_sample_size_within_limits():
    expected_n = expected_samples_bayes(REFERENCE_SCHEME, UNIFORM)
    assert REFERENCE.t_lo <= expected_n <= REFERENCE.t_up


def test_monotone_in_cost():
    coverage = coverage_grid(UNIFORM, H, 300)
    predictive = predictive_grid(UNIFORM, 300)

    miss, expected_n = [], []
    for c in [1e-3, 3e-3, 1e-2]:
        scheme = backward_solve(UNIFORM, H, c, 300, coverage, predictive).to_scheme()
        miss.append(miss_prob_bayes(scheme, UNIFORM, predictive))
        expected_n.append(expected_samples_bayes(scheme, UNIFORM, predictive))

    assert miss == sorted(miss)
    assert expected_n == sorted(expected_n, reverse=True)


@pytest.mark.parametrize('theta', [0.1, 0.3, 0.5])
def test_simulation_agrees(theta):
    summary = simulate(REFERENCE_SCHEME, theta, 100000, seed=20240308)

    exact_n = expected_samples_given_theta(REFERENCE_SCHEME, theta)
    exact_miss = miss_prob_given_theta(REFERENCE_SCHEME, theta)

    assert abs(summary.mean_T - exact_n) <= 3 * summary.se_T
    assert abs(summary.miss_rate - exact_miss) <= 3 * summary.se_miss + 1e-5


def test_simulation_deterministic():
    first = simulate(SMALL_SCHEME, 0.3, 2000, seed=7)
    second = simulate(SMALL_SCHEME, 0.3, 2000, seed=7)
    other = simulate(SMALL_SCHEME, 0.3, 2000, seed=8)

    assert first == second
    assert first != other


def test_simulation_fixed_sample_size():
    summary = simulate(fss_scheme(UNIFORM, H, 10), 0.4, 500, seed=1)
    assert summary.mean_T == 10
    assert summary.se_T == 0


def test_simulation_domain():
    with pytest.raises(DomainError):
        simulate(SMALL_SCHEME, 0.3, 0, seed=1)

    with pytest.raises(DomainError):
        simulate(SMALL_SCHEME, 1.3, 10, seed=1)


def test_evaluate():
    report = evaluate(SMALL_SCHEME, UNIFORM)

    assert isinstance(report, PerformanceReport)
    assert report.theta.shape == (1001,)
    np.testing.assert_allclose(report.theta, default_theta_grid())
    assert np.all((report.miss_given_theta >= 0) & (report.miss_given_theta <= 1))
    assert np.all((report.expected_n_given_theta >= 0) & (report.expected_n_given_theta <= 40))
    np.testing.assert_allclose(report.coverage_bayes, 1 - report.miss_bayes)


def test_mix_reports():
    theta = np.linspace(0, 1, 11)
    first = evaluate(SMALL_SCHEME, UNIFORM, theta)
    second = evaluate(fss_scheme(UNIFORM, 0.1, 12), UNIFORM, theta)

    assert mix_reports(1., first, second).miss_bayes == first.miss_bayes
    mixed = mix_reports(0.25, first, second)
    np.testing.assert_allclose(mixed.expected_n, 0.25 * first.expected_n + 0.75 * second.expected_n)
    np.testing.assert_allclose(mixed.miss_given_theta, 0.25 * first.miss_given_theta + 0.75 * second.miss_given_theta)

    with pytest.raises(DomainError):
        mix_reports(1.5, first, second)


def test_miss_at_interval_edge():
    stop = SchemeOnLattice(0, [np.array([False])], [np.array([0.5])], [np.array([0.9])], H)

    # 0.55 - 0.5 rounds above 0.05
    np.testing.assert_array_equal(miss_prob_given_theta(stop, [0.44, 0.45, 0.5, 0.55, 0.56]), [1, 0, 0, 0, 1])
    assert not missed(0.95, 1., H)
    assert not missed(0.05, 0., H)


def test_extreme_theta_covered():
    np.testing.assert_array_equal(miss_prob_given_theta(REFERENCE_SCHEME, [0., 1.]), [0., 0.])

    theta, miss = worst_case_miss(REFERENCE_SCHEME, default_theta_grid())
    assert 0 < theta < 1
    assert miss < 0.5


def test_simulation_extreme_theta():
    for theta in [0., 1.]:
        assert simulate(REFERENCE_SCHEME, theta, 1000, seed=3).miss_rate == 0


def test_simulation_draw_layout():
    scheme = fss_scheme(UNIFORM, H, 3)
    draws = np.random.default_rng(5).random((3, 500))
    successes = np.sum(draws < 0.4, axis=0)

    summary = simulate(scheme, 0.4, 500, seed=5)

    assert summary.miss_rate == np.mean(missed(scheme.estimates[3][successes], 0.4, H))
