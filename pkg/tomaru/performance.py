"""Exact performance of stopping schemes on the (t, S_t) lattice

Every scheme that stops as soon as S_t leaves a sampling region and then
reports a mid-point can be evaluated exactly with four backward recursions,
per fixed theta and averaged over the prior. A Monte Carlo simulator is kept
as an independent check of the recursions.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

from .tomaru_math import np
from .prior import predictive_grid
from .errors import DomainError

logger = logging.getLogger(__name__)

DEFAULT_THETA_NODES = 1001

# |estimate - theta| = h is a hit even when the subtraction rounds up
MISS_TOL = 1e-12


def default_theta_grid(nodes=DEFAULT_THETA_NODES):
    """equispaced theta grid including both end points"""
    return np.linspace(0., 1., nodes)


def missed(estimate, theta, h):
    """True where the interval [estimate - h, estimate + h] excludes theta"""
    return np.abs(estimate - theta) > h + MISS_TOL


@dataclass(frozen=True, eq=False)
class SchemeOnLattice:
    """a stopping rule expressed through sampling regions on the lattice

    Attributes
    ----------
    horizon : int
        last time instant N, the scheme always stops by N
    sampling : list of numpy.ndarray
        boolean masks, sampling[t][s] is True when the scheme continues at (t, s)
    estimates : list of numpy.ndarray
        mid-point reported when stopping at (t, s)
    comp_coverage : list of numpy.ndarray or None
        posterior probability of a miss when stopping at (t, s) with that
        mid-point, under the prior used for Bayes evaluation. None for a
        scheme only evaluated at fixed theta
    h : float
        half-width of the reported interval
    name : str, optional
        label used in reports
    """
    horizon: int
    sampling: list
    estimates: list
    comp_coverage: list
    h: float
    name: str = 'scheme'

    def __post_init__(self):
        depth = self.horizon + 1
        layers = [self.sampling, self.estimates]
        if self.comp_coverage is not None:
            layers.append(self.comp_coverage)
        if any(len(layer) < depth for layer in layers):
            raise DomainError(f'scheme {self.name!r} needs {depth} lattice layers')
        if np.any(self.sampling[self.horizon]):
            raise DomainError(f'scheme {self.name!r} must stop at its horizon {self.horizon}')


@dataclass(frozen=True, eq=False)
class PerformanceReport:
    """exact performance of a scheme

    Attributes
    ----------
    theta : numpy.ndarray
        grid of proportions the per-theta quantities are evaluated on
    expected_n_given_theta : numpy.ndarray
        E[T | theta]
    expected_n : float
        E[T] under the prior
    miss_given_theta : numpy.ndarray
        P(|theta_hat_T - theta| > h | theta)
    miss_bayes : float
        P(|theta_hat_T - theta| > h) under the prior
    """
    theta: object
    expected_n_given_theta: object
    expected_n: float
    miss_given_theta: object
    miss_bayes: float

    @property
    def coverage_given_theta(self):
        return 1 - self.miss_given_theta

    @property
    def coverage_bayes(self):
        return 1 - self.miss_bayes


def _resolve_h(scheme, h):
    return scheme.h if h is None else h


def expected_samples_given_theta(scheme, theta):
    """E[T | theta] for a fixed proportion

    Parameters
    ----------
    scheme : SchemeOnLattice
        stopping scheme
    theta : float or numpy.ndarray
        proportion(s) in [0, 1]. Arrays are evaluated in one sweep

    Returns
    -------
    float or numpy.ndarray
        expected number of samples, same shape as theta
    """

    theta = np.asarray(theta, dtype=float)
    th = theta[..., np.newaxis]
    n = scheme.horizon

    following = np.zeros(theta.shape + (n + 1,))
    for t in range(n - 1, -1, -1):
        inside = following * scheme.sampling[t + 1]
        following = 1 + th * inside[..., 1:] + (1 - th) * inside[..., :-1]

    out = np.where(scheme.sampling[0][0], following[..., 0], 0.)

    return float(out) if out.ndim == 0 else out


def expected_samples_bayes(scheme, prior, predictive=None):
    """E[T] averaged over the prior

    Parameters
    ----------
    scheme : SchemeOnLattice
        stopping scheme
    prior : BetaPrior or TabulatedPrior
        prior on theta
    predictive : list of numpy.ndarray, optional
        precomputed `prior.predictive_grid`, at least as deep as the scheme

    Returns
    -------
    float
        expected number of samples
    """

    n = scheme.horizon
    if predictive is None:
        predictive = predictive_grid(prior, n)

    following = np.zeros(n + 1)
    for t in range(n - 1, -1, -1):
        g = predictive[t]
        inside = following * scheme.sampling[t + 1]
        following = 1 + g * inside[1:] + (1 - g) * inside[:-1]

    return float(following[0]) if scheme.sampling[0][0] else 0.


def miss_prob_given_theta(scheme, theta, h=None):
    """P(|theta_hat_T - theta| > h | theta) for a fixed proportion

    Parameters
    ----------
    scheme : SchemeOnLattice
        stopping scheme
    theta : float or numpy.ndarray
        proportion(s) in [0, 1]
    h : float, optional
        half-width, defaults to the scheme's

    Returns
    -------
    float or numpy.ndarray
        miss probability, same shape as theta
    """

    h = _resolve_h(scheme, h)
    theta = np.asarray(theta, dtype=float)
    th = theta[..., np.newaxis]
    n = scheme.horizon

    following = missed(scheme.estimates[n], th, h).astype(float)
    for t in range(n - 1, -1, -1):
        outside = missed(scheme.estimates[t], th, h).astype(float)
        continuing = th * following[..., 1:] + (1 - th) * following[..., :-1]
        following = np.where(scheme.sampling[t], continuing, outside)

    out = following[..., 0]

    return float(out) if out.ndim == 0 else out


def miss_prob_bayes(scheme, prior, predictive=None):
    """P(|theta_hat_T - theta| > h) averaged over the prior

    Parameters
    ----------
    scheme : SchemeOnLattice
        stopping scheme, its comp_coverage computed under `prior`
    prior : BetaPrior or TabulatedPrior
        prior on theta
    predictive : list of numpy.ndarray, optional
        precomputed `prior.predictive_grid`, at least as deep as the scheme

    Returns
    -------
    float
        miss probability
    """

    if scheme.comp_coverage is None:
        raise DomainError(f'scheme {scheme.name!r} carries no coverage grid for Bayes evaluation')

    n = scheme.horizon
    if predictive is None:
        predictive = predictive_grid(prior, n)

    following = np.asarray(scheme.comp_coverage[n], dtype=float)
    for t in range(n - 1, -1, -1):
        g = predictive[t]
        continuing = g * following[1:] + (1 - g) * following[:-1]
        following = np.where(scheme.sampling[t], continuing, scheme.comp_coverage[t])

    return float(following[0])


def expected_cost(scheme, prior, c, predictive=None):
    """c E[T] + P(miss), the unconstrained cost of a scheme"""
    if predictive is None:
        predictive = predictive_grid(prior, scheme.horizon)

    return (c * expected_samples_bayes(scheme, prior, predictive)
            + miss_prob_bayes(scheme, prior, predictive))


def worst_case_miss(scheme, theta_grid, h=None):
    """largest miss probability over a grid of proportions

    Parameters
    ----------
    scheme : SchemeOnLattice
        stopping scheme
    theta_grid : array_like
        proportions to evaluate, nonempty
    h : float, optional
        half-width, defaults to the scheme's

    Returns
    -------
    tuple of float
        (theta*, miss*). The first grid point attaining the maximum is returned
    """

    theta_grid = np.asarray(theta_grid, dtype=float)
    if theta_grid.size == 0:
        raise DomainError('worst-case miss needs a nonempty theta grid')

    miss = np.atleast_1d(miss_prob_given_theta(scheme, theta_grid, h))
    worst = int(np.argmax(miss))

    return float(theta_grid.ravel()[worst]), float(miss.ravel()[worst])


def evaluate(scheme, prior, theta_grid=None, predictive=None):
    """full performance report of a scheme

    Parameters
    ----------
    scheme : SchemeOnLattice
        stopping scheme
    prior : BetaPrior or TabulatedPrior
        prior for the Bayes quantities
    theta_grid : array_like, optional
        proportions for the per-theta quantities, by default 1001 equispaced points
    predictive : list of numpy.ndarray, optional
        precomputed `prior.predictive_grid`

    Returns
    -------
    PerformanceReport
    """

    theta = default_theta_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    if predictive is None:
        predictive = predictive_grid(prior, scheme.horizon)

    return PerformanceReport(theta,
                             np.atleast_1d(expected_samples_given_theta(scheme, theta)),
                             expected_samples_bayes(scheme, prior, predictive),
                             np.atleast_1d(miss_prob_given_theta(scheme, theta)),
                             miss_prob_bayes(scheme, prior, predictive))


def mix_reports(p, first, second):
    """performance of running `first` with probability p and `second` otherwise

    Parameters
    ----------
    p : float
        probability of the first scheme, decided before any sample is taken
    first, second : PerformanceReport
        reports on the same theta grid

    Returns
    -------
    PerformanceReport
        the p-mixture of every quantity
    """

    if not 0 <= p <= 1:
        raise DomainError(f'mixing probability must lie in [0, 1], got {p}')

    def mix(x, y):
        return p * x + (1 - p) * y

    return PerformanceReport(first.theta,
                             mix(first.expected_n_given_theta, second.expected_n_given_theta),
                             mix(first.expected_n, second.expected_n),
                             mix(first.miss_given_theta, second.miss_given_theta),
                             mix(first.miss_bayes, second.miss_bayes))


class SimulationSummary(NamedTuple):
    mean_T: float
    se_T: float
    miss_rate: float
    se_miss: float


def simulate(scheme, theta, replications, seed, h=None):
    """Monte Carlo estimate of E[T | theta] and the miss probability

    Parameters
    ----------
    scheme : SchemeOnLattice
        stopping scheme
    theta : float
        proportion in [0, 1]
    replications : int
        number of independent sample paths, at least 1
    seed : int
        seed of numpy's default generator (PCG64)
    h : float, optional
        half-width, defaults to the scheme's

    Returns
    -------
    SimulationSummary
        sample means and their standard errors

    Notes
    -----
    Uniforms are drawn one block of `replications` per time instant, and every
    replication consumes its draw whether stopped or not. Path i uses the
    uniforms at positions t * replications + i of the seeded stream, so it
    depends on the seed, on i and on the number of replications.
    """

    if replications < 1:
        raise DomainError(f'need at least one replication, got {replications}')
    if not 0 <= theta <= 1:
        raise DomainError(f'theta must lie in [0, 1], got {theta}')

    h = _resolve_h(scheme, h)
    rng = np.random.default_rng(seed)

    successes = np.zeros(replications, dtype=int)
    active = np.ones(replications, dtype=bool)
    stopped_at = np.zeros(replications, dtype=int)
    lost = np.zeros(replications, dtype=bool)

    for t in range(scheme.horizon + 1):
        stopping = active & ~scheme.sampling[t][successes]
        stopped_at[stopping] = t
        lost[stopping] = missed(scheme.estimates[t][successes[stopping]], theta, h)
        active &= ~stopping

        if not np.any(active):
            break

        draws = rng.random(replications)
        successes += active & (draws < theta)

    logger.debug('simulated %d paths of %r at theta=%g', replications, scheme.name, theta)

    mean_T = float(np.mean(stopped_at))
    se_T = float(np.std(stopped_at, ddof=1) / np.sqrt(replications)) if replications > 1 else 0.
    miss_rate = float(np.mean(lost))
    se_miss = float(np.sqrt(miss_rate * (1 - miss_rate) / replications))

    return SimulationSummary(mean_T, se_T, miss_rate, se_miss)
