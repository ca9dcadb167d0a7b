"""Finite-horizon optimal stopping for the sequential interval estimate"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .tomaru_math import np, empty_triangle
from .prior import predictive_grid
from .midpoint import check_half_width, coverage_grid
from .bounds import log_horizon
from .performance import SchemeOnLattice
from .errors import DomainError, LatticeError, NonIntervalRegionError

logger = logging.getLogger(__name__)

DEFAULT_MAX_HORIZON = 5000

ALL_SAMPLING = 'all-sampling'
ALL_STOPPING = 'all-stopping'


@dataclass(frozen=True, eq=False)
class PolicyGrid:
    """solution of the backward recursion

    Attributes
    ----------
    values : list of numpy.ndarray
        optimal residual cost V_t(s)
    continue_values : list of numpy.ndarray
        average residual cost of continuing, V~_t(s). The last layer is the
        recursion's initialization V_(N+1) = 1
    sampling : list of numpy.ndarray
        boolean masks, sampling[t][s] is True when s is in the sampling region
    horizon : int
        last time instant N
    """
    values: list
    continue_values: list
    sampling: list
    horizon: int


class Thresholds(NamedTuple):
    """stopping thresholds at one time instant

    The sampling region is the open integer interval (r_lo, r_hi). marker is
    ALL_SAMPLING when it covers every s and ALL_STOPPING when it is empty, in
    which case r_lo and r_hi are None.
    """
    r_lo: Optional[int]
    r_hi: Optional[int]
    marker: Optional[str]


class Verdict(NamedTuple):
    """outcome of the stopping rule at one lattice cell"""
    stop: bool
    estimate: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None


def extract_limits(grid):
    """lower and upper limits of the optimal stopping time

    Parameters
    ----------
    grid : PolicyGrid
        solved policy grid

    Returns
    -------
    tuple of int
        (t_lo, t_up). t_up is the first t with an empty sampling region and
        t_lo is the length of the prefix of instants whose sampling region
        holds every s
    """

    t_up = next(t for t, mask in enumerate(grid.sampling) if not np.any(mask))
    t_lo = next((t for t, mask in enumerate(grid.sampling) if not np.all(mask)), grid.horizon)

    return t_lo, t_up


def thresholds(grid, t):
    """thresholds of the stopping region at time t

    Parameters
    ----------
    grid : PolicyGrid
        solved policy grid
    t : int
        time instant, 0 <= t <= horizon

    Returns
    -------
    Thresholds
        r_lo and r_hi such that the sampling region is r_lo < s < r_hi
    """

    if not 0 <= t <= grid.horizon:
        raise LatticeError(f'time {t} is outside the horizon {grid.horizon}')

    inside = np.flatnonzero(grid.sampling[t])

    if inside.size == 0:
        return Thresholds(None, None, ALL_STOPPING)

    first, last = int(inside[0]), int(inside[-1])
    if last - first + 1 != inside.size:
        raise NonIntervalRegionError(f'sampling region at t={t} is not an interval: {inside.tolist()}')

    if inside.size == t + 1:
        return Thresholds(-1, t + 1, ALL_SAMPLING)

    return Thresholds(first - 1, last + 1, None)


def solve_grid(comp_coverage, predictive, c, horizon):
    """backward recursion V_t = min(C_t, c + V~_t) on given coverage and predictive grids

    Parameters
    ----------
    comp_coverage : list of numpy.ndarray
        optimal complementary coverage C_t(s), at least `horizon` deep
    predictive : list of numpy.ndarray
        predictive success probabilities g_{t+1}(s)
    c : float
        cost per sample
    horizon : int
        last time instant N

    Returns
    -------
    PolicyGrid
        values, continuation values and sampling masks. Ties between stopping
        and continuing are resolved by stopping
    """

    values = empty_triangle(horizon)
    continue_values = empty_triangle(horizon)
    sampling = empty_triangle(horizon, fill=False, dtype=bool)

    values[horizon] = np.array(comp_coverage[horizon], dtype=float)
    continue_values[horizon] = np.ones(horizon + 1)

    for t in range(horizon - 1, -1, -1):
        g = predictive[t]
        following = values[t + 1]
        continuing = g * following[1:] + (1 - g) * following[:-1]
        sample = comp_coverage[t] > c + continuing

        continue_values[t] = continuing
        sampling[t] = sample
        values[t] = np.where(sample, c + continuing, comp_coverage[t])

    return PolicyGrid(values, continue_values, sampling, horizon)


@dataclass(frozen=True, eq=False)
class StoppingPolicy:
    """optimal sequential interval procedure for a prior, half-width and cost

    Attributes
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta
    h : float
        half-width
    c : float
        cost per sample
    horizon : int
        last time instant N
    grid : PolicyGrid
        values and sampling regions
    coverage : CoverageGrid
        Bayes mid-points and their complementary coverage
    t_lo, t_up : int
        no stopping before t_lo, stopping is certain at t_up
    """
    prior: object
    h: float
    c: float
    horizon: int
    grid: PolicyGrid
    coverage: object
    t_lo: int
    t_up: int

    @property
    def estimates(self):
        return self.coverage.estimates

    @property
    def value(self):
        """V_0(0), the optimal cost c E[T] + P(miss)"""
        return float(self.grid.values[0][0])

    def decide(self, t, s):
        return decide(self, t, s)

    def truncated(self):
        """the policy restricted to t <= t_up, which is all the rule can reach"""
        if self.t_up == self.horizon:
            return self

        n = self.t_up
        grid = PolicyGrid(self.grid.values[:n + 1],
                          self.grid.continue_values[:n] + [np.ones(n + 1)],
                          self.grid.sampling[:n + 1],
                          n)

        return StoppingPolicy(self.prior, self.h, self.c, n, grid,
                              self.coverage.truncated(n), self.t_lo, self.t_up)

    def to_scheme(self):
        """the policy as a lattice scheme for the performance recursions"""
        return SchemeOnLattice(self.horizon,
                               self.grid.sampling,
                               self.coverage.estimates,
                               self.coverage.comp_coverage,
                               self.h,
                               name='optimal')


def default_horizon(prior, h, c, max_horizon=DEFAULT_MAX_HORIZON):
    """logarithmic horizon for a Beta prior, capped at max_horizon

    Parameters
    ----------
    prior : BetaPrior
        prior on theta. Other priors have no closed-form horizon
    h : float
        half-width
    c : float
        cost per sample, 0 < c <= 1
    max_horizon : int, optional
        cap on the returned horizon, by default 5000

    Returns
    -------
    int
        horizon at which stopping is certain
    """

    if prior.kind != 'beta':
        raise DomainError('a horizon must be given explicitly for a tabulated prior')
    if not c > 0:
        raise DomainError('a horizon must be given explicitly when c = 0')

    horizon = log_horizon(min(c, 1.), (prior.p + prior.q) / 2, h)

    if horizon > max_horizon:
        logger.warning('horizon %d for c=%g capped at %d', horizon, c, max_horizon)
        horizon = max_horizon

    return horizon


def backward_solve(prior, h, c, horizon=None, coverage=None, predictive=None,
                   max_horizon=DEFAULT_MAX_HORIZON):
    """solve the optimal stopping problem for the cost c E[T] + P(miss)

    Parameters
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta
    h : float
        half-width, 0 < h < 1/2
    c : float
        cost per sample, c >= 0
    horizon : int, optional
        last time instant N. Defaults to `default_horizon`
    coverage : CoverageGrid, optional
        precomputed mid-points for the same prior and h, at least N deep.
        Reusing one grid across many c is what makes calibration cheap
    predictive : list of numpy.ndarray, optional
        precomputed `prior.predictive_grid`, at least N deep
    max_horizon : int, optional
        cap on the default horizon, by default 5000

    Returns
    -------
    StoppingPolicy
        the optimal policy and its limits t_lo, t_up
    """

    h = check_half_width(h)
    if not c >= 0:
        raise DomainError(f'cost per sample must be nonnegative, got {c}')

    if horizon is None:
        horizon = default_horizon(prior, h, c, max_horizon)
    if horizon < 0:
        raise DomainError(f'horizon must be nonnegative, got {horizon}')

    if coverage is None:
        coverage = coverage_grid(prior, h, horizon)
    elif coverage.horizon < horizon or coverage.h != h or coverage.prior != prior:
        raise DomainError('coverage grid does not match the prior, half-width or horizon')
    elif coverage.horizon > horizon:
        coverage = coverage.truncated(horizon)

    if predictive is None:
        predictive = predictive_grid(prior, horizon)

    grid = solve_grid(coverage.comp_coverage, predictive, c, horizon)
    t_lo, t_up = extract_limits(grid)

    logger.debug('solved c=%g to horizon %d: t_lo=%d, t_up=%d, V_0=%.6g',
                 c, horizon, t_lo, t_up, grid.values[0][0])

    return StoppingPolicy(prior, h, c, horizon, grid, coverage, t_lo, t_up)


def decide(policy, t, s):
    """apply the stopping rule at (t, S_t = s)

    Parameters
    ----------
    policy : StoppingPolicy
        solved policy
    t : int
        number of observations so far
    s : int
        number of successes so far

    Returns
    -------
    Verdict
        Verdict(stop=False) inside the sampling region, otherwise the
        mid-point and the interval [mid - h, mid + h] cropped to [0, 1]
    """

    if not 0 <= s <= t <= policy.horizon:
        raise LatticeError(f'({t}, {s}) is outside the lattice of horizon {policy.horizon}')

    if policy.grid.sampling[t][s]:
        return Verdict(False)

    estimate = float(policy.coverage.estimates[t][s])

    return Verdict(True, estimate, max(0., estimate - policy.h), min(1., estimate + policy.h))
