"""Bayes mid-points of fixed-width intervals and their conditional coverage"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

from scipy.special import betainc, xlogy, xlog1py

from .tomaru_math import np, Bracket, find_root, maximize_unimodal, empty_triangle
from .prior import PosteriorState, posterior_mass
from .errors import DomainError, LatticeError

logger = logging.getLogger(__name__)

RESIDUAL_SCAN_NODES = 512
TIE_TOL = 1e-14
BISECTION_STEPS = 50

# keeps brentq away from infinite slopes at h and 1-h
_SLOPE_CLIP = 1e300


class MidpointCell(NamedTuple):
    estimate: float
    comp_coverage: float


def check_half_width(h):
    """validate an interval half-width, 0 < h < 1/2

    Parameters
    ----------
    h : float
        half-width of the interval estimate

    Returns
    -------
    float
        h as a float
    """

    if not 0 < h < 0.5:
        raise DomainError(f'half-width must lie in (0, 0.5), got {h}')

    return float(h)


def _beta_comp_coverage(p, q, mid, h):
    """complementary coverage of [mid-h, mid+h] under Beta(p, q), broadcast"""
    # 1 - I_x(p, q) = I_(1-x)(q, p)
    upper = betainc(q, p, np.maximum(0., 1. - mid - h))
    lower = betainc(p, q, np.maximum(0., mid - h))
    return np.clip(upper + lower, 0., 1.)


def coverage_given_midpoint(state, mid, h):
    """posterior probability that theta falls outside [mid-h, mid+h]

    Parameters
    ----------
    state : PosteriorState
        observation counts and prior
    mid : float
        mid-point of the interval, in [0, 1]. The interval is cropped at 0 and 1
    h : float
        half-width

    Returns
    -------
    float
        complementary coverage probability
    """

    h = check_half_width(h)
    if not 0 <= mid <= 1:
        raise DomainError(f'mid-point must lie in [0, 1], got {mid}')

    if state.prior.kind == 'beta':
        p = state.prior.p + state.s
        q = state.prior.q + state.t - state.s
        return float(_beta_comp_coverage(p, q, mid, h))

    return 1. - posterior_mass(state, max(mid - h, 0.), min(mid + h, 1.))


def _log_sides(state, mid, h):
    """logs of the two sides of the root equation, broadcast over mid

    For a Beta prior these are the logs of ((m-h)/(m+h))^(p+S-1) and
    ((1-h-m)/(1+h-m))^(q+t-S-1). Otherwise they are the logs of the
    posterior kernel at m+h and at m-h.
    """

    mid = np.asarray(mid, dtype=float)
    t, s, prior = state.t, state.s, state.prior

    if prior.kind == 'beta':
        alpha = prior.p + s - 1
        beta = prior.q + t - s - 1
        with np.errstate(divide='ignore', invalid='ignore'):
            left = xlogy(alpha, (mid - h) / (mid + h))
            right = xlogy(beta, (1 - h - mid) / (1 + h - mid))
        return left, right

    with np.errstate(divide='ignore', invalid='ignore'):
        upper = xlogy(s, mid + h) + xlog1py(t - s, -(mid + h)) + prior.log_density(mid + h)
        lower = xlogy(s, mid - h) + xlog1py(t - s, -(mid - h)) + prior.log_density(mid - h)
    return upper, lower


def _log_slope(state, mid, h):
    """a quantity with the sign of d/dmid of the coverage of [mid-h, mid+h]"""
    first, second = _log_sides(state, mid, h)

    if state.prior.kind == 'beta':
        slope = second - first
    else:
        slope = first - second

    with np.errstate(invalid='ignore'):
        # both sides -inf or both +inf: the coverage is locally flat
        return np.where(np.isnan(slope), 0., slope)


def root_equation_residual(state, mid, h):
    """left-hand side of the equation whose roots are candidate mid-points

    Parameters
    ----------
    state : PosteriorState
        observation counts and prior
    mid : float
        candidate mid-point, h <= mid <= 1-h
    h : float
        half-width

    Returns
    -------
    float
        Beta prior: ((mid-h)/(mid+h))^(p+S-1) - ((1-h-mid)/(1+h-mid))^(q+t-S-1).
        Other priors: kernel(mid+h) - kernel(mid-h), with
        kernel(x) = x^S (1-x)^(t-S) pi(x). Powers are evaluated in log space
    """

    h = check_half_width(h)
    if not h <= mid <= 1 - h:
        raise DomainError(f'mid-point must lie in [h, 1-h], got {mid}')

    first, second = _log_sides(state, mid, h)
    first, second = float(first), float(second)

    if first == second:
        return 0.
    if np.isinf(max(first, second)):
        return np.inf if first > second else -np.inf

    # exp(first) - exp(second) with the larger factor pulled out
    top = max(first, second)
    return float(np.exp(top) * (np.exp(first - top) - np.exp(second - top)))


def _interior_roots(state, h):
    """sign changes of the root equation over [h, 1-h], refined"""
    nodes = np.linspace(h, 1 - h, RESIDUAL_SCAN_NODES)
    slope = _log_slope(state, nodes, h)

    if np.all(slope == 0):
        return None

    def f(m):
        return float(np.clip(_log_slope(state, m, h), -_SLOPE_CLIP, _SLOPE_CLIP))

    roots = []
    signs = np.sign(slope)
    for i in range(RESIDUAL_SCAN_NODES - 1):
        if signs[i] == 0:
            roots.append(nodes[i])
        elif signs[i] * signs[i + 1] < 0:
            roots.append(find_root(f, Bracket(nodes[i], nodes[i + 1])))

    return roots


def _select(candidates, comp):
    """lowest complementary coverage, ties go to the smallest mid-point"""
    order = np.argsort(candidates, kind='stable')
    best = order[0]
    for i in order[1:]:
        if comp[i] < comp[best] - TIE_TOL:
            best = i

    return MidpointCell(float(candidates[best]), float(comp[best]))


def optimal_midpoint(state, h):
    """Bayes mid-point minimizing the posterior probability of a miss

    Parameters
    ----------
    state : PosteriorState
        observation counts and prior
    h : float
        half-width

    Returns
    -------
    MidpointCell
        optimal mid-point in [h, 1-h] and the complementary coverage it attains

    Notes
    -----
    Candidates are the interior roots of the root equation together with the
    end points h and 1-h. A residual that vanishes everywhere means every
    mid-point in [h, 1-h] is optimal, and the centre 1/2 is returned.
    """

    h = check_half_width(h)
    roots = _interior_roots(state, h)

    if roots is None:
        return MidpointCell(0.5, coverage_given_midpoint(state, 0.5, h))

    candidates = [h, 1 - h, *roots]

    if state.prior.kind != 'beta' and not roots:
        # no stationary point; the interpolated density may still peak inside
        argmax, _ = maximize_unimodal(lambda m: -coverage_given_midpoint(state, m, h),
                                      Bracket(h, 1 - h))
        candidates.append(argmax)

    candidates = np.asarray(candidates)
    comp = np.array([coverage_given_midpoint(state, m, h) for m in candidates])

    return _select(candidates, comp)


@dataclass(frozen=True, eq=False)
class CoverageGrid:
    """optimal mid-points and complementary coverage over the (t, S_t) lattice"""
    prior: object
    h: float
    horizon: int
    estimates: list
    comp_coverage: list

    def cell(self, t, s):
        if not 0 <= s <= t <= self.horizon:
            raise LatticeError(f'({t}, {s}) is outside the lattice of horizon {self.horizon}')

        return MidpointCell(float(self.estimates[t][s]), float(self.comp_coverage[t][s]))

    def truncated(self, horizon):
        """the same grid restricted to t <= horizon"""
        if not 0 <= horizon <= self.horizon:
            raise LatticeError(f'cannot truncate a horizon {self.horizon} grid to {horizon}')

        return CoverageGrid(self.prior, self.h, horizon,
                            self.estimates[:horizon + 1],
                            self.comp_coverage[:horizon + 1])


def _beta_lattice(prior, h, horizon):
    """all Beta-prior cells at once

    The log residual alpha*log((m-h)/(m+h)) - beta*log((1-h-m)/(1+h-m)) is
    increasing in m when both exponents are nonnegative, so a single
    vectorized bisection finds the only interior root. Cells with a negative
    exponent go through the scalar scan.
    """

    t = np.repeat(np.arange(horizon + 1), np.arange(1, horizon + 2))
    starts = np.arange(horizon + 1) * (np.arange(horizon + 1) + 1) // 2
    s = np.arange(t.size) - starts[t]

    p = prior.p + s
    q = prior.q + t - s
    alpha = p - 1
    beta = q - 1

    estimates = np.full(t.size, h)
    comp = _beta_comp_coverage(p, q, estimates, h)

    # h < root < 1-h, so checking in increasing order keeps ties at the smaller mid-point
    interior = (alpha > 0) & (beta > 0)
    if np.any(interior):
        a_in, b_in = alpha[interior], beta[interior]
        lo = np.full(a_in.size, h)
        hi = np.full(a_in.size, 1 - h)
        for _ in range(BISECTION_STEPS):
            mid = (lo + hi) / 2
            residual = a_in * (np.log(mid - h) - np.log(mid + h)) \
                - b_in * (np.log(1 - h - mid) - np.log(1 + h - mid))
            above = residual > 0
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)

        root = (lo + hi) / 2
        root_comp = _beta_comp_coverage(p[interior], q[interior], root, h)
        better = root_comp < comp[interior] - TIE_TOL
        estimates[interior] = np.where(better, root, estimates[interior])
        comp[interior] = np.where(better, root_comp, comp[interior])

    right_comp = _beta_comp_coverage(p, q, 1 - h, h)
    better = right_comp < comp - TIE_TOL
    estimates = np.where(better, 1 - h, estimates)
    comp = np.where(better, right_comp, comp)

    flat = (alpha == 0) & (beta == 0)
    estimates[flat] = 0.5
    comp[flat] = _beta_comp_coverage(p[flat], q[flat], 0.5, h)

    irregular = np.flatnonzero((alpha < 0) | (beta < 0))
    for index in irregular:
        cell = optimal_midpoint(PosteriorState(int(t[index]), int(s[index]), prior), h)
        estimates[index], comp[index] = cell

    logger.debug('beta lattice to horizon %d: %d cells, %d scanned', horizon, t.size, irregular.size)

    return np.split(estimates, starts[1:]), np.split(comp, starts[1:])


def coverage_grid(prior, h, horizon):
    """optimal mid-point and complementary coverage for every lattice cell

    Parameters
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta
    h : float
        half-width
    horizon : int
        last time instant N, cells 0 <= s <= t <= N are filled

    Returns
    -------
    CoverageGrid
        estimates and comp_coverage as triangular arrays
    """

    h = check_half_width(h)
    if horizon < 0:
        raise DomainError(f'horizon must be nonnegative, got {horizon}')

    if prior.kind == 'beta':
        estimates, comp = _beta_lattice(prior, h, horizon)
    else:
        estimates = empty_triangle(horizon)
        comp = empty_triangle(horizon)
        for t in range(horizon + 1):
            for s in range(t + 1):
                estimates[t][s], comp[t][s] = optimal_midpoint(PosteriorState(t, s, prior), h)

    return CoverageGrid(prior, h, horizon, estimates, comp)


def coverage_of_estimates(prior, h, estimates):
    """complementary coverage of arbitrary mid-points on the lattice

    Parameters
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta
    h : float
        half-width
    estimates : list of numpy.ndarray
        triangular array of mid-points in [0, 1], e.g. a frequentist estimator

    Returns
    -------
    list of numpy.ndarray
        posterior probability that theta falls outside each cropped interval
    """

    h = check_half_width(h)
    comp = empty_triangle(len(estimates) - 1)

    for t, mids in enumerate(estimates):
        mids = np.clip(np.asarray(mids, dtype=float), 0., 1.)
        s = np.arange(t + 1)
        if prior.kind == 'beta':
            comp[t] = _beta_comp_coverage(prior.p + s, prior.q + t - s, mids, h)
        else:
            comp[t] = np.array([coverage_given_midpoint(PosteriorState(t, k, prior), m, h)
                                for k, m in zip(range(t + 1), mids)])

    return comp


def expected_comp_coverage(grid, pmf):
    """E[C_t] for every t, averaging the coverage grid over the law of S_t

    Parameters
    ----------
    grid : CoverageGrid
        optimal complementary coverage
    pmf : list of numpy.ndarray
        law of S_t, e.g. from `prior.marginal_pmf_grid`, at least as deep as the grid

    Returns
    -------
    numpy.ndarray
        E[C_t], t = 0, ..., horizon. E[C_n] is the miss probability of the
        fixed-sample-size scheme with n samples
    """

    return np.array([np.dot(pmf[t], grid.comp_coverage[t]) for t in range(grid.horizon + 1)])
