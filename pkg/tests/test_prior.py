import pytest
from tomaru.tomaru_math import np, BetaParams, reg_inc_beta
from tomaru.prior import (
    BetaPrior,
    TabulatedPrior,
    PosteriorState,
    prior_from_dict,
    posterior_params,
    posterior_mass,
    posterior_cdf,
    predictive_success,
    predictive_failure,
    posterior_mean,
    posterior_variance,
    predictive_grid,
    marginal_pmf_grid
)
from tomaru.errors import DomainError, UnsupportedPriorError

UNIFORM = BetaPrior.symmetric(1)
FLAT_TABLE = TabulatedPrior((0., 1.), (1., 1.))

# Beta(2, 2) density sampled finely enough for the interpolation error to vanish
_nodes = np.linspace(0, 1, 2001)
BETA22_TABLE = TabulatedPrior.from_density(_nodes, _nodes * (1 - _nodes))


def test_beta_prior_shapes():
    prior = BetaPrior.symmetric(2.5)
    assert (prior.p, prior.q) == (2.5, 2.5)
    assert prior.is_symmetric
    assert not BetaPrior(1, 3).is_symmetric


@pytest.mark.parametrize('p, q', [(0, 1), (1, -2), (float('nan'), 1)])
def test_beta_prior_domain(p, q):
    with pytest.raises(DomainError):
        BetaPrior(p, q)


def test_beta_log_density():
    np.testing.assert_allclose(np.exp(BetaPrior(2, 2).log_density([0.25, 0.5])), [1.125, 1.5])


def test_tabulated_prior_validation():
    with pytest.raises(DomainError):
        TabulatedPrior((0., 1.), (1., 2.))

    with pytest.raises(DomainError):
        TabulatedPrior((0.1, 1.), (1., 1.))

    with pytest.raises(DomainError):
        TabulatedPrior((0., 0.6, 0.5, 1.), (1., 1., 1., 1.))


def test_tabulated_from_density():
    prior = TabulatedPrior.from_density([0, 0.5, 1], [0, 1, 0])
    np.testing.assert_allclose(prior.density, [0, 2, 0])
    assert prior.is_symmetric


def test_tabulated_asymmetric():
    prior = TabulatedPrior.from_density([0, 0.5, 1], [1, 2, 4])
    assert not prior.is_symmetric


def test_prior_dict_round_trip():
    for prior in [BetaPrior(0.5, 3), FLAT_TABLE]:
        assert prior_from_dict(prior.to_dict()) == prior


def test_prior_from_dict_unknown():
    with pytest.raises(DomainError):
        prior_from_dict({'kind': 'gaussian'})


def test_posterior_state_domain():
    with pytest.raises(DomainError):
        PosteriorState(3, 4, UNIFORM)


def test_posterior_state_advance():
    state = PosteriorState(0, 0, UNIFORM).advance(1).advance(0).advance(1)
    assert (state.t, state.s) == (3, 2)


def test_posterior_params():
    assert posterior_params(PosteriorState(10, 3, UNIFORM)) == BetaParams(4, 8)


def test_posterior_params_tabulated():
    with pytest.raises(UnsupportedPriorError):
        posterior_params(PosteriorState(10, 3, FLAT_TABLE))


def test_predictive_beta():
    state = PosteriorState(10, 3, UNIFORM)
    np.testing.assert_allclose(predictive_success(state), 4 / 12)
    np.testing.assert_allclose(predictive_failure(state), 8 / 12)
    np.testing.assert_allclose(posterior_mean(state), 4 / 12)


def test_posterior_variance_beta():
    np.testing.assert_allclose(posterior_variance(PosteriorState(10, 3, UNIFORM)),
                               4 * 8 / (12**2 * 13))


@pytest.mark.parametrize('t, s', [(0, 0), (5, 0), (10, 3), (40, 40)])
def test_tabulated_matches_beta(t, s):
    beta = PosteriorState(t, s, UNIFORM)
    table = PosteriorState(t, s, FLAT_TABLE)

    np.testing.assert_allclose(predictive_success(table), predictive_success(beta), rtol=1e-10)
    np.testing.assert_allclose(posterior_variance(table), posterior_variance(beta), rtol=1e-8)
    np.testing.assert_allclose(posterior_mass(table, 0.2, 0.45), posterior_mass(beta, 0.2, 0.45), atol=1e-10)


def test_tabulated_beta22():
    for t, s in [(0, 0), (7, 2), (30, 21)]:
        table = PosteriorState(t, s, BETA22_TABLE)
        beta = PosteriorState(t, s, BetaPrior(2, 2))
        np.testing.assert_allclose(predictive_success(table), predictive_success(beta), rtol=1e-5)
        np.testing.assert_allclose(posterior_cdf(table, 0.4), posterior_cdf(beta, 0.4), atol=1e-5)


def test_posterior_mass_uniform():
    np.testing.assert_allclose(posterior_mass(PosteriorState(0, 0, UNIFORM), 0.2, 0.5), 0.3)
    np.testing.assert_allclose(posterior_mass(PosteriorState(0, 0, FLAT_TABLE), 0.2, 0.5), 0.3)
    assert posterior_mass(PosteriorState(0, 0, FLAT_TABLE), 0.4, 0.4) == 0


def test_posterior_mass_domain():
    with pytest.raises(DomainError):
        posterior_mass(PosteriorState(0, 0, UNIFORM), 0.6, 0.5)


def test_posterior_cdf_beta():
    state = PosteriorState(12, 5, BetaPrior(2, 3))
    np.testing.assert_allclose(posterior_cdf(state, 0.4), reg_inc_beta(0.4, BetaParams(7, 10)))


def test_predictive_grid():
    grid = predictive_grid(UNIFORM, 3)

    assert len(grid) == 4
    np.testing.assert_allclose(grid[2], np.arange(3) / 4 + 1 / 4)


def test_predictive_grid_tabulated():
    beta = predictive_grid(UNIFORM, 6)
    table = predictive_grid(FLAT_TABLE, 6)

    for t in range(7):
        np.testing.assert_allclose(table[t], beta[t], rtol=1e-10)


def test_marginal_pmf_uniform():
    # under the uniform prior S_t is uniform on {0, ..., t}
    pmf = marginal_pmf_grid(UNIFORM, 20)

    for t in range(21):
        np.testing.assert_allclose(pmf[t], np.full(t + 1, 1 / (t + 1)), atol=1e-15)


def test_marginal_pmf_sums_to_one():
    pmf = marginal_pmf_grid(BetaPrior(0.5, 4), 50)
    np.testing.assert_allclose([layer.sum() for layer in pmf], 1, atol=1e-13)


@pytest.mark.parametrize('prior', [BetaPrior(2, 5), BETA22_TABLE])
def test_posterior_mean_martingale(prior):
    for t in range(12):
        for s in range(t + 1):
            state = PosteriorState(t, s, prior)
            g = predictive_success(state)
            ahead = g * posterior_mean(state.advance(1)) + (1 - g) * posterior_mean(state.advance(0))
            np.testing.assert_allclose(ahead, posterior_mean(state), rtol=1e-10)
