"""Priors on the binomial proportion and the posteriors they induce"""
from dataclasses import dataclass, field

from scipy.special import logsumexp, xlogy, xlog1py

from .tomaru_math import (
    np,
    BetaParams,
    reg_inc_beta,
    log_gamma,
    composite_gauss_legendre,
    empty_triangle
)
from .errors import DomainError, UnsupportedPriorError, QuadratureError

QUAD_PANELS = 32
QUAD_NODES = 64
NORMALIZATION_TOL = 1e-8

# fixed rule on [0, 1] used for every normalizer of a tabulated prior
_QUAD_THETA, _QUAD_WEIGHTS = composite_gauss_legendre(0., 1., QUAD_PANELS, QUAD_NODES)
_QUAD_LOG_WEIGHTS = np.log(_QUAD_WEIGHTS)


@dataclass(frozen=True)
class BetaPrior:
    """Beta(p, q) prior on theta. p = q = 1 is the uniform prior

    Parameters
    ----------
    p : float
        shape attached to successes, positive
    q : float
        shape attached to failures, positive
    """
    p: float
    q: float

    kind = 'beta'

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise DomainError(f'Beta prior shapes must be positive, got p={self.p}, q={self.q}')

    @classmethod
    def symmetric(cls, a):
        """the Beta(a, a) prior"""
        return cls(a, a)

    @property
    def is_symmetric(self):
        return self.p == self.q

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        logbeta = log_gamma(self.p) + log_gamma(self.q) - log_gamma(self.p + self.q)
        return xlogy(self.p - 1, theta) + xlog1py(self.q - 1, -theta) - logbeta

    def to_dict(self):
        return {'kind': self.kind, 'p': float(self.p), 'q': float(self.q)}


@dataclass(frozen=True)
class TabulatedPrior:
    """Prior density tabulated on [0, 1] and interpolated linearly between nodes

    Parameters
    ----------
    nodes : tuple of float
        increasing abscissae, the first equal to 0 and the last equal to 1
    density : tuple of float
        nonnegative density at each node. Must integrate to one under the
        module's quadrature rule, use `from_density` to normalize raw values
    """
    nodes: tuple
    density: tuple
    _theta: object = field(init=False, repr=False, compare=False)
    _density: object = field(init=False, repr=False, compare=False)

    kind = 'tabulated'

    def __post_init__(self):
        theta = np.asarray(self.nodes, dtype=float)
        density = np.asarray(self.density, dtype=float)

        if theta.ndim != 1 or theta.shape != density.shape or theta.size < 2:
            raise DomainError('tabulated prior needs matching 1D node and density arrays')
        if theta[0] != 0 or theta[-1] != 1 or np.any(np.diff(theta) <= 0):
            raise DomainError('tabulated prior nodes must increase from 0 to 1')
        if np.any(density < 0) or not np.all(np.isfinite(density)):
            raise DomainError('tabulated prior density must be finite and nonnegative')

        object.__setattr__(self, '_theta', theta)
        object.__setattr__(self, '_density', density)

        total = np.sum(_QUAD_WEIGHTS * self.interpolate(_QUAD_THETA))
        if abs(total - 1) > NORMALIZATION_TOL:
            raise DomainError(f'tabulated prior integrates to {total}, not 1')

    @classmethod
    def from_density(cls, nodes, density):
        """build a prior from unnormalized density values

        Parameters
        ----------
        nodes : array_like
            increasing abscissae spanning [0, 1]
        density : array_like
            nonnegative values proportional to the density at the nodes

        Returns
        -------
        TabulatedPrior
            prior with the density rescaled to integrate to one
        """
        theta = np.asarray(nodes, dtype=float)
        density = np.asarray(density, dtype=float)
        total = np.sum(_QUAD_WEIGHTS * np.interp(_QUAD_THETA, theta, density))
        if not total > 0:
            raise DomainError('tabulated prior density has no mass')

        return cls(tuple(theta.tolist()), tuple((density / total).tolist()))

    @property
    def is_symmetric(self):
        mirrored = np.interp(1 - self._theta, self._theta, self._density)
        return bool(np.allclose(mirrored, self._density, rtol=1e-12, atol=1e-12))

    def interpolate(self, theta):
        return np.interp(theta, self._theta, self._density)

    def log_density(self, theta):
        with np.errstate(divide='ignore'):
            return np.log(self.interpolate(theta))

    def to_dict(self):
        return {'kind': self.kind,
                'nodes': [[float(x), float(d)] for x, d in zip(self.nodes, self.density)]}


def prior_from_dict(data):
    """rebuild a prior from its JSON form

    Parameters
    ----------
    data : dict
        {"kind": "beta", "p": ..., "q": ...} or
        {"kind": "tabulated", "nodes": [[theta, density], ...]}

    Returns
    -------
    BetaPrior or TabulatedPrior
    """

    kind = data.get('kind')
    if kind == 'beta':
        return BetaPrior(float(data['p']), float(data['q']))
    elif kind == 'tabulated':
        pairs = np.asarray(data['nodes'], dtype=float)
        return TabulatedPrior(tuple(pairs[:, 0].tolist()), tuple(pairs[:, 1].tolist()))

    raise DomainError(f'unknown prior kind {kind!r}')


@dataclass(frozen=True)
class PosteriorState:
    """S_t = s successes observed in t trials under a prior"""
    t: int
    s: int
    prior: object

    def __post_init__(self):
        if not (0 <= self.s <= self.t):
            raise DomainError(f'posterior state needs 0 <= s <= t, got t={self.t}, s={self.s}')

    def advance(self, bit):
        """the state after observing one more trial"""
        return PosteriorState(self.t + 1, self.s + int(bit), self.prior)


def _log_kernel(t, s, prior, theta):
    """log of theta^s (1-theta)^(t-s) pi(theta), broadcast over s and theta"""
    return xlogy(s, theta) + xlog1py(t - s, -theta) + prior.log_density(theta)


def _log_evidence(t, s, prior):
    """log of the posterior normalizer, broadcast over an array of s"""
    s = np.asarray(s, dtype=float)
    logk = _log_kernel(t, s[..., np.newaxis], prior, _QUAD_THETA) + _QUAD_LOG_WEIGHTS
    with np.errstate(invalid='ignore'):
        out = logsumexp(logk, axis=-1)

    if not np.all(np.isfinite(out)):
        raise QuadratureError(f'posterior normalizer underflowed at t={t}')

    return out


def posterior_params(state):
    """shape parameters of the Beta posterior

    Parameters
    ----------
    state : PosteriorState
        observation counts under a Beta prior

    Returns
    -------
    BetaParams
        (p + s, q + t - s)
    """

    if state.prior.kind != 'beta':
        raise UnsupportedPriorError('posterior shapes exist only for Beta priors')

    return BetaParams(state.prior.p + state.s, state.prior.q + state.t - state.s)


def posterior_mass(state, lo, hi):
    """posterior probability of the interval [lo, hi]

    Parameters
    ----------
    state : PosteriorState
        observation counts and prior
    lo, hi : float
        interval limits, 0 <= lo <= hi <= 1

    Returns
    -------
    float
        posterior mass of [lo, hi]
    """

    if not 0 <= lo <= hi <= 1:
        raise DomainError(f'posterior mass needs 0 <= lo <= hi <= 1, got [{lo}, {hi}]')

    if state.prior.kind == 'beta':
        params = posterior_params(state)
        # 1 - I_hi(p, q) = I_(1-hi)(q, p) keeps the upper tail accurate
        upper = reg_inc_beta(1 - hi, BetaParams(params.q, params.p))
        lower = reg_inc_beta(lo, params)
        return max(0., 1. - upper - lower)

    if hi == lo:
        return 0.

    theta, weights = composite_gauss_legendre(lo, hi, QUAD_PANELS, QUAD_NODES)
    with np.errstate(invalid='ignore'):
        lognum = logsumexp(_log_kernel(state.t, state.s, state.prior, theta) + np.log(weights))

    return float(min(1., np.exp(lognum - _log_evidence(state.t, state.s, state.prior))))


def posterior_cdf(state, x):
    """posterior cdf of theta

    Parameters
    ----------
    state : PosteriorState
        observation counts and prior
    x : float
        evaluation point in [0, 1]

    Returns
    -------
    float
        P(theta <= x | S_t = s)
    """

    if not 0 <= x <= 1:
        raise DomainError(f'posterior cdf needs 0 <= x <= 1, got {x}')

    if state.prior.kind == 'beta':
        return reg_inc_beta(x, posterior_params(state))

    return posterior_mass(state, 0., x)


def predictive_success(state):
    """probability g_{t+1}(s) that the next trial is a success

    Parameters
    ----------
    state : PosteriorState
        observation counts and prior

    Returns
    -------
    float
        P(X_{t+1} = 1 | S_t = s), which is also the posterior mean of theta
    """

    prior = state.prior
    if prior.kind == 'beta':
        return (state.s + prior.p) / (state.t + prior.p + prior.q)

    ratio = _log_evidence(state.t + 1, state.s + 1, prior) - _log_evidence(state.t, state.s, prior)
    return float(np.exp(ratio))


def predictive_failure(state):
    """probability 1 - g_{t+1}(s) that the next trial is a failure"""
    return 1 - predictive_success(state)


def posterior_mean(state):
    """E[theta | S_t = s]"""
    return predictive_success(state)


def posterior_variance(state):
    """Var[theta | S_t = s]

    Notes
    -----
    E[theta^2 | S_t = s] = g_{t+1}(s) g_{t+2}(s+1), so the tabulated case needs
    no quadrature beyond the predictive probabilities
    """

    if state.prior.kind == 'beta':
        params = posterior_params(state)
        total = params.p + params.q
        return params.p * params.q / (total**2 * (total + 1))

    g = predictive_success(state)
    return g * predictive_success(state.advance(1)) - g**2


def predictive_grid(prior, horizon):
    """g_{t+1}(s) for every lattice cell 0 <= s <= t <= horizon

    Parameters
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta
    horizon : int
        last time instant

    Returns
    -------
    list of numpy.ndarray
        layer t holds g_{t+1}(s) for s = 0, ..., t
    """

    grid = empty_triangle(horizon)

    for t in range(horizon + 1):
        s = np.arange(t + 1)

        if prior.kind == 'beta':
            grid[t] = (s + prior.p) / (t + prior.p + prior.q)
        else:
            grid[t] = np.exp(_log_evidence(t + 1, s + 1, prior) - _log_evidence(t, s, prior))

    return grid


def marginal_pmf_grid(prior, horizon, predictive=None):
    """prior predictive law of S_t for t = 0, ..., horizon

    Parameters
    ----------
    prior : BetaPrior or TabulatedPrior
        prior on theta
    horizon : int
        last time instant
    predictive : list of numpy.ndarray, optional
        output of `predictive_grid`, computed when not supplied

    Returns
    -------
    list of numpy.ndarray
        layer t holds P(S_t = s) for s = 0, ..., t. For a Beta prior this is
        the beta-binomial law
    """

    if predictive is None:
        predictive = predictive_grid(prior, horizon)

    pmf = empty_triangle(horizon)
    pmf[0][0] = 1.

    for t in range(horizon):
        step = pmf[t] * predictive[t]
        pmf[t + 1][1:] += step
        pmf[t + 1][:-1] += pmf[t] - step

    return pmf
