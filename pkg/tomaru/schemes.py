"""Competitor schemes on the lattice and calibration to a coverage target

The competitors are Frey's shrinkage Wald rule, the fixed-sample-size scheme
and the conditional rule that stops once the optimal complementary coverage
drops below a threshold. All of them, and the optimal policy, can be
calibrated to a common miss probability, in the Bayes sense or worst-case
over theta.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .tomaru_math import np, normal_upper_quantile
from .prior import predictive_grid, marginal_pmf_grid
from .midpoint import check_half_width, coverage_grid, coverage_of_estimates, expected_comp_coverage
from .policy import backward_solve, default_horizon
from .bounds import risk_horizon
from .performance import (
    SchemeOnLattice,
    expected_samples_bayes,
    miss_prob_bayes,
    worst_case_miss,
    default_theta_grid,
    evaluate
)
from .errors import DomainError, CalibrationError

logger = logging.getLogger(__name__)

# published (k, gamma) of the shrinkage Wald rule, keyed by (h, nominal coverage)
FREY_TABLE = {
    (0.10, 0.90): (4, 0.0754),
    (0.10, 0.95): (4, 0.0356),
    (0.10, 0.99): (6, 0.0068),
    (0.05, 0.90): (4, 0.0859),
    (0.05, 0.95): (6, 0.0433),
    (0.05, 0.99): (8, 0.0083),
    (0.01, 0.90): (8, 0.0972),
    (0.01, 0.95): (10, 0.0487),
    (0.01, 0.99): (14, 0.0097),
}

C_FLOOR = 1e-12
BISECTION_STEPS = 60
JUMP_TOL = 1e-6
CALIBRATION_TOL = 1e-3

BAYES = 'bayes'
WORST_CASE = 'worst-case'


def _ceil(x):
    return int(math.ceil(round(x, 9)))


@dataclass(frozen=True)
class FreyConfig:
    """shrinkage k and nominal level gamma of Frey's sequential rule"""
    k: float
    gamma: float
    h: float

    def __post_init__(self):
        if not self.k > 0:
            raise DomainError(f'shrinkage k must be positive, got {self.k}')
        if not 0 < self.gamma < 1:
            raise DomainError(f'gamma must lie in (0, 1), got {self.gamma}')
        check_half_width(self.h)

    @classmethod
    def from_table(cls, h, coverage):
        """the published configuration for half-width h and nominal coverage"""
        try:
            k, gamma = FREY_TABLE[(h, coverage)]
        except KeyError:
            raise DomainError(f'no published configuration for h={h}, coverage={coverage}') from None

        return cls(k, gamma, h)

    @property
    def z(self):
        return normal_upper_quantile(self.gamma / 2)

    @property
    def horizon(self):
        """ceil(z^2 / (4 h^2)), after which the rule stops for every S_t"""
        return _ceil(self.z**2 / (4 * self.h**2))


def _full(t):
    return np.ones(t + 1, dtype=bool)


def _empty(t):
    return np.zeros(t + 1, dtype=bool)


def frey_scheme(config, prior=None):
    """Frey's rule as a lattice scheme

    Stops at the first t >= 1 with th(1 - th) / t <= (h / z)^2, where
    th = (S_t + k) / (t + 2k) and z is the upper gamma/2 normal quantile, and
    reports S_t / t.

    Parameters
    ----------
    config : FreyConfig
        k, gamma and h
    prior : BetaPrior or TabulatedPrior, optional
        prior used to fill comp_coverage for Bayes evaluation. Without it the
        scheme can only be evaluated at fixed theta

    Returns
    -------
    SchemeOnLattice
    """

    n = config.horizon
    threshold = (config.h / config.z)**2

    sampling = [_full(0)]
    estimates = [np.array([0.5])]
    for t in range(1, n + 1):
        s = np.arange(t + 1)
        shrunk = (s + config.k) / (t + 2 * config.k)
        sampling.append(shrunk * (1 - shrunk) / t > threshold)
        estimates.append(s / t)

    # x(1 - x) <= 1/4 already stops every path at n, up to rounding
    sampling[n] = _empty(n)

    comp = None if prior is None else coverage_of_estimates(prior, config.h, estimates)

    return SchemeOnLattice(n, sampling, estimates, comp, config.h,
                           name=f'frey(k={config.k:g},gamma={config.gamma:g})')


def _matching_grid(prior, h, horizon, coverage):
    if coverage is None:
        return coverage_grid(prior, h, horizon)
    if coverage.horizon < horizon or coverage.h != h or coverage.prior != prior:
        raise DomainError('coverage grid does not match the prior, half-width or horizon')

    return coverage.truncated(horizon)


def fss_scheme(prior, h, n, coverage=None):
    """fixed-sample-size scheme: take n samples, report the Bayes mid-point

    Parameters
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta
    h : float
        half-width
    n : int
        sample size, n >= 0. n = 0 stops before sampling
    coverage : CoverageGrid, optional
        precomputed mid-points, at least n deep

    Returns
    -------
    SchemeOnLattice
    """

    if n < 0:
        raise DomainError(f'sample size must be nonnegative, got {n}')

    grid = _matching_grid(prior, h, n, coverage)
    sampling = [_full(t) for t in range(n)] + [_empty(n)]

    return SchemeOnLattice(n, sampling, grid.estimates, grid.comp_coverage, grid.h, name=f'fss(n={n})')


def fss_sample_size(prior, h, alpha, max_n=None, coverage=None):
    """smallest n whose fixed-sample-size miss probability E[C_n] is at most alpha

    Parameters
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta
    h : float
        half-width
    alpha : float
        target miss probability in (0, 1)
    max_n : int, optional
        largest n searched. Defaults to the Chebyshev risk horizon, which
        always meets the target
    coverage : CoverageGrid, optional
        precomputed mid-points, at least max_n deep

    Returns
    -------
    int
    """

    h = check_half_width(h)
    if max_n is None:
        max_n = risk_horizon(alpha, h)

    grid = _matching_grid(prior, h, max_n, coverage)
    miss = expected_comp_coverage(grid, marginal_pmf_grid(prior, max_n))

    feasible = np.flatnonzero(miss <= alpha)
    if feasible.size == 0:
        raise CalibrationError(f'no sample size up to {max_n} reaches miss probability {alpha}')

    return int(feasible[0])


def conditional_horizon(prior, h, beta):
    """ceil(max(|log(beta/2)| / (2 h^2) - (p + q) - 1, 0)) for a Beta(p, q) prior"""
    if prior.kind != 'beta':
        raise DomainError('a horizon must be given explicitly for a tabulated prior')
    if not 0 < beta < 1:
        raise DomainError(f'threshold beta must lie in (0, 1), got {beta}')

    return _ceil(max(abs(math.log(beta / 2)) / (2 * h**2) - (prior.p + prior.q) - 1, 0.))


def conditional_scheme(prior, h, beta, horizon=None, coverage=None):
    """stop at the first t with C_t(S_t) <= beta

    Parameters
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta
    h : float
        half-width
    beta : float
        threshold on the complementary coverage, 0 < beta < 1
    horizon : int, optional
        forced stopping time. Defaults to `conditional_horizon`, where the
        threshold is met for every S_t
    coverage : CoverageGrid, optional
        precomputed mid-points, at least horizon deep

    Returns
    -------
    SchemeOnLattice
    """

    h = check_half_width(h)
    if not 0 < beta < 1:
        raise DomainError(f'threshold beta must lie in (0, 1), got {beta}')
    if horizon is None:
        horizon = conditional_horizon(prior, h, beta)

    grid = _matching_grid(prior, h, horizon, coverage)
    sampling = [grid.comp_coverage[t] > beta for t in range(horizon)] + [_empty(horizon)]

    return SchemeOnLattice(horizon, sampling, grid.estimates, grid.comp_coverage, h,
                           name=f'conditional(beta={beta:g})')


class CalibrationStep(NamedTuple):
    c: float
    miss: float
    expected_n: float


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    """Lagrange multiplier meeting a Bayes miss target, possibly randomized

    Attributes
    ----------
    c_star : float
        calibrated cost per sample
    randomization_p : float
        probability of running policy_lo; policy_hi runs otherwise
    policy_lo, policy_hi : StoppingPolicy
        policies just below and just above c_star
    achieved_miss : float
        miss probability of the randomized procedure
    achieved_n : float
        expected sample size of the randomized procedure
    trace : list of CalibrationStep
        every evaluation made by the search
    """
    c_star: float
    randomization_p: float
    policy_lo: object
    policy_hi: object
    achieved_miss: float
    achieved_n: float
    trace: list = field(default_factory=list)

    @property
    def randomized(self):
        return 0 < self.randomization_p < 1


def calibrate_c(prior, h, alpha, horizon=None, coverage=None):
    """cost per sample whose optimal policy has Bayes miss probability alpha

    Parameters
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta
    h : float
        half-width
    alpha : float
        target miss probability in (0, 1)
    horizon : int, optional
        horizon shared by every solve. Defaults to the Chebyshev risk horizon,
        which guarantees that c = 0 meets the target
    coverage : CoverageGrid, optional
        precomputed mid-points, at least horizon deep

    Returns
    -------
    CalibrationResult

    Notes
    -----
    The miss probability is nondecreasing in c but moves in steps, so the
    bisection on log c ends on a bracket whose two policies are mixed with
    the probability that hits alpha exactly.
    """

    h = check_half_width(h)
    if not 0 < alpha < 1:
        raise DomainError(f'miss probability target must lie in (0, 1), got {alpha}')
    if horizon is None:
        horizon = risk_horizon(alpha, h)

    coverage = _matching_grid(prior, h, horizon, coverage)
    predictive = predictive_grid(prior, horizon)
    trace = []

    def solve(c):
        policy = backward_solve(prior, h, c, horizon, coverage, predictive)
        scheme = policy.to_scheme()
        miss = miss_prob_bayes(scheme, prior, predictive)
        expected_n = expected_samples_bayes(scheme, prior, predictive)
        trace.append(CalibrationStep(c, miss, expected_n))
        logger.debug('calibration c=%.6g: miss=%.6g, E[T]=%.6g', c, miss, expected_n)
        return policy, miss, expected_n

    comp_0 = float(coverage.comp_coverage[0][0])
    if alpha >= comp_0:
        policy, miss, expected_n = solve(1.)
        logger.info('target %g is met without sampling, C_0=%g', alpha, comp_0)
        return CalibrationResult(1., 1., policy, policy, miss, expected_n, trace)

    c_lo, low = C_FLOOR, solve(C_FLOOR)
    if low[1] > alpha:
        c_hi, high = c_lo, low
        c_lo, low = 0., solve(0.)
        if low[1] > alpha:
            raise CalibrationError(f'miss probability {low[1]:.6g} at c=0 exceeds {alpha} '
                                   f'with horizon {horizon}')
    else:
        c_hi, high = 1., solve(1.)
        for _ in range(BISECTION_STEPS):
            c_mid = math.sqrt(c_lo * c_hi)
            middle = solve(c_mid)
            if middle[1] <= alpha:
                c_lo, low = c_mid, middle
            else:
                c_hi, high = c_mid, middle

    (policy_lo, miss_lo, n_lo), (policy_hi, miss_hi, n_hi) = low, high

    if miss_hi - miss_lo > JUMP_TOL:
        p = (miss_hi - alpha) / (miss_hi - miss_lo)
    else:
        p = 1.

    achieved_miss = p * miss_lo + (1 - p) * miss_hi
    achieved_n = p * n_lo + (1 - p) * n_hi
    c_star = math.sqrt(c_lo * c_hi) if c_lo > 0 else 0.

    logger.info('calibrated c*=%.6g for alpha=%g: p=%.4f, miss=%.6g, E[T]=%.6g',
                c_star, alpha, p, achieved_miss, achieved_n)

    return CalibrationResult(c_star, p, policy_lo, policy_hi, achieved_miss, achieved_n, trace)


class ScalarCalibration(NamedTuple):
    parameter: float
    achieved_miss: float
    scheme: object


def calibrate_scalar(family, target, bounds, mode=BAYES, integer=False, log_scale=False,
                     prior=None, theta_grid=None):
    """tune the scalar parameter of a scheme family to a miss target

    Parameters
    ----------
    family : callable
        maps the parameter to a SchemeOnLattice. The miss probability must be
        monotone in the parameter, in either direction
    target : float
        target miss probability in (0, 1)
    bounds : tuple of float
        search interval (lo, hi). The target must lie between the misses at
        the two ends
    mode : str, optional
        'bayes' for the prior-averaged miss, 'worst-case' for the maximum over
        `theta_grid`. By default 'bayes'
    integer : bool, optional
        search integers only, by default False
    log_scale : bool, optional
        bisect on the logarithm of a positive parameter, by default False
    prior : BetaPrior or TabulatedPrior, optional
        prior for 'bayes' mode
    theta_grid : array_like, optional
        proportions for 'worst-case' mode, by default 1001 equispaced points

    Returns
    -------
    ScalarCalibration
        the parameter closest to the boundary whose miss does not exceed the
        target, with its miss and scheme
    """

    if mode == BAYES:
        if prior is None:
            raise DomainError('bayes calibration needs a prior')
        miss_of = lambda scheme: miss_prob_bayes(scheme, prior)
    elif mode == WORST_CASE:
        grid = default_theta_grid() if theta_grid is None else theta_grid
        miss_of = lambda scheme: worst_case_miss(scheme, grid)[1]
    else:
        raise DomainError(f'unknown calibration mode {mode!r}')

    if not 0 < target < 1:
        raise DomainError(f'miss probability target must lie in (0, 1), got {target}')

    def measure(x):
        x = int(x) if integer else float(x)
        scheme = family(x)
        return ScalarCalibration(x, miss_of(scheme), scheme)

    lo, hi = measure(bounds[0]), measure(bounds[1])
    lo_ok, hi_ok = lo.achieved_miss <= target, hi.achieved_miss <= target

    if lo_ok == hi_ok:
        raise CalibrationError(f'misses {lo.achieved_miss:.6g} and {hi.achieved_miss:.6g} '
                               f'at {bounds} do not bracket {target}')

    # keep `good` on the feasible side throughout
    good, bad = (lo, hi) if lo_ok else (hi, lo)

    for _ in range(BISECTION_STEPS):
        if integer:
            if abs(good.parameter - bad.parameter) <= 1:
                break
            x = (good.parameter + bad.parameter) // 2
        elif log_scale:
            x = math.sqrt(good.parameter * bad.parameter)
        else:
            x = (good.parameter + bad.parameter) / 2

        middle = measure(x)
        if middle.achieved_miss <= target:
            good = middle
        else:
            bad = middle

    if target - good.achieved_miss > CALIBRATION_TOL:
        logger.warning('calibrated miss %.6g is %.2g below the target %g',
                       good.achieved_miss, target - good.achieved_miss, target)
    logger.info('calibrated parameter %.6g in %s mode: miss=%.6g', good.parameter, mode, good.achieved_miss)

    return good


class FrontierPoint(NamedTuple):
    c: float
    expected_n: float
    coverage: float
    t_lo: int
    t_up: int


def lagrangian_frontier(prior, h, costs, horizon=None):
    """expected sample size and coverage of the optimal policy over costs c

    Parameters
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta
    h : float
        half-width
    costs : iterable of float
        costs per sample
    horizon : int, optional
        shared horizon, by default the logarithmic horizon of the smallest cost

    Returns
    -------
    list of FrontierPoint
        one row per cost, in the given order
    """

    costs = [float(c) for c in costs]
    if not costs:
        return []

    h = check_half_width(h)
    if horizon is None:
        horizon = default_horizon(prior, h, min(costs))

    coverage = coverage_grid(prior, h, horizon)
    predictive = predictive_grid(prior, horizon)

    points = []
    for c in costs:
        policy = backward_solve(prior, h, c, horizon, coverage, predictive)
        scheme = policy.to_scheme()
        points.append(FrontierPoint(c,
                                    expected_samples_bayes(scheme, prior, predictive),
                                    1 - miss_prob_bayes(scheme, prior, predictive),
                                    policy.t_lo,
                                    policy.t_up))

    return points


class ComparedScheme(NamedTuple):
    name: str
    parameter: float
    worst_miss: float
    report: object


def worst_case_comparison(prior, h, alpha, theta_grid=None, horizon=None):
    """optimal, fixed-sample-size, conditional and Frey schemes at one worst-case miss

    Every scheme is tuned with `calibrate_scalar` in worst-case mode: the
    optimal policy on c, the fixed-sample-size scheme on n, the conditional
    scheme on beta and Frey's rule on gamma, with k taken from `FREY_TABLE`.

    Parameters
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta, used by the optimal and conditional schemes and for
        the Bayes columns of the reports
    h : float
        half-width
    alpha : float
        largest miss probability allowed at any theta of the grid
    theta_grid : array_like, optional
        proportions the worst case is taken over, by default 1001 equispaced points
    horizon : int, optional
        horizon of the optimal policy and largest fixed sample size, by
        default the Chebyshev risk horizon of alpha

    Returns
    -------
    list of ComparedScheme
        name, calibrated parameter, achieved worst-case miss and the
        performance report on `theta_grid`. Frey's rule is left out when
        (h, 1 - alpha) has no published configuration
    """

    h = check_half_width(h)
    theta = default_theta_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    if horizon is None:
        horizon = risk_horizon(alpha, h)

    beta_lo = alpha / 4
    depth = max(horizon, conditional_horizon(prior, h, beta_lo))
    coverage = coverage_grid(prior, h, depth)
    predictive = predictive_grid(prior, depth)
    comp_0 = float(coverage.comp_coverage[0][0])

    def calibrate(family, bounds, **kwargs):
        return calibrate_scalar(family, alpha, bounds, mode=WORST_CASE, theta_grid=theta, **kwargs)

    def optimal(c):
        return backward_solve(prior, h, c, horizon, coverage, predictive).truncated().to_scheme()

    found = [('optimal', calibrate(optimal, (C_FLOOR, 1.), log_scale=True)),
             ('fss', calibrate(lambda n: fss_scheme(prior, h, n, coverage), (0, horizon), integer=True)),
             ('conditional', calibrate(lambda beta: conditional_scheme(prior, h, beta, coverage=coverage),
                                       (beta_lo, comp_0)))]

    if (h, 1 - alpha) in FREY_TABLE:
        k, _ = FREY_TABLE[(h, 1 - alpha)]
        frey = calibrate(lambda gamma: frey_scheme(FreyConfig(k, gamma, h)), (alpha / 10, 0.5))
        found.append(('frey', frey._replace(scheme=frey_scheme(FreyConfig(k, frey.parameter, h), prior))))
    else:
        logger.warning('no published Frey configuration for h=%g, coverage %g', h, 1 - alpha)

    compared = []
    for name, calibration in found:
        report = evaluate(calibration.scheme, prior, theta, predictive)
        compared.append(ComparedScheme(name, calibration.parameter, calibration.achieved_miss, report))
        logger.info('%s calibrated to worst-case miss %.6g with parameter %.6g',
                    name, calibration.achieved_miss, calibration.parameter)

    return compared
