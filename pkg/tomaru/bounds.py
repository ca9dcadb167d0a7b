"""Closed-form bounds on the optimal coverage, horizon and stopping limits

All logarithms are natural logarithms. The bounds assume a Beta(a, a) prior;
for a Beta(p, q) prior pass a = (p + q) / 2 to the Chernoff-type bounds, they
only depend on p + q.
"""
import math
from dataclasses import dataclass

from .tomaru_math import np, log_gamma
from .errors import DomainError

# guards ceil/floor against representation error, e.g. 1/(4*0.05**2*1e-4)
_ROUNDING_DIGITS = 9


def _ceil(x):
    return int(math.ceil(round(x, _ROUNDING_DIGITS)))


def _floor(x):
    return int(math.floor(round(x, _ROUNDING_DIGITS)))


def _check(a, h):
    if not a > 0:
        raise DomainError(f'prior shape must be positive, got {a}')
    if not 0 < h < 0.5:
        raise DomainError(f'half-width must lie in (0, 0.5), got {h}')


@dataclass(frozen=True)
class BetaFractionalParts:
    """a = n_a + delta_a with n_a a nonnegative integer and 0 < delta_a <= 1"""
    n_a: int
    delta_a: float


def fractional_parts(a):
    """split a Beta shape into its integer and fractional parts

    Parameters
    ----------
    a : float
        positive shape

    Returns
    -------
    BetaFractionalParts
        (a - 1, 1) for integer a, (floor(a), a - floor(a)) otherwise
    """

    if not a > 0:
        raise DomainError(f'prior shape must be positive, got {a}')

    if float(a).is_integer():
        return BetaFractionalParts(int(a) - 1, 1.)

    n_a = int(math.floor(a))
    return BetaFractionalParts(n_a, a - n_a)


def chernoff_upper(t, a, h):
    """upper bound 2 exp(-2 h^2 (t + 2a + 1)) on the optimal complementary coverage

    Parameters
    ----------
    t : int
        time instant, t >= 0
    a : float
        shape of the Beta(a, a) prior
    h : float
        half-width

    Returns
    -------
    float
        bound valid for C_t(s) at every s. Exceeds 1 for small t
    """

    _check(a, h)
    if t < 0:
        raise DomainError(f'time must be nonnegative, got {t}')

    return 2 * math.exp(-2 * h**2 * (t + 2 * a + 1))


def log_incbeta_lower(t, a, h):
    """natural logarithm of `incbeta_lower`"""
    _check(a, h)
    if t < 1:
        raise DomainError(f'the incomplete beta lower bound needs t >= 1, got {t}')

    parts = fractional_parts(a)
    n, delta = parts.n_a, parts.delta_a

    return (math.log(2) + delta * math.log(0.25 - h**2) + (t + 2 * n) * math.log(0.5 - h)
            - math.log(t + 2 * n + 2 * delta) - log_gamma(delta))


def incbeta_lower(t, a, h):
    """lower bound on the optimal complementary coverage at time t >= 1

    Parameters
    ----------
    t : int
        time instant, t >= 1
    a : float
        shape of the Beta(a, a) prior
    h : float
        half-width

    Returns
    -------
    float
        2 (1/4 - h^2)^delta (1/2 - h)^(t + 2n) / ((t + 2n + 2 delta) Gamma(delta))
        with n, delta the fractional parts of a. Valid for C_t(s) at every s
    """

    return math.exp(log_incbeta_lower(t, a, h))


def chebyshev_sigma_bound(t, p, q):
    """maximal posterior variance over S_t and its envelope

    Parameters
    ----------
    t : int
        time instant, t >= 0
    p, q : float
        shapes of the Beta(p, q) prior

    Returns
    -------
    tuple of float
        (max over s of Var[theta | S_t = s], 1 / (4 (t + p + q + 1)))
    """

    if not (p > 0 and q > 0):
        raise DomainError(f'prior shapes must be positive, got p={p}, q={q}')
    if t < 0:
        raise DomainError(f'time must be nonnegative, got {t}')

    s = np.arange(t + 1)
    total = t + p + q
    variance = (p + s) * (t - s + q) / (total**2 * (total + 1))

    return float(np.max(variance)), 1 / (4 * (total + 1))


def chebyshev_coverage_bound(t, p, q, h):
    """Chebyshev bound sigma_t^2 / h^2 on the optimal complementary coverage"""
    if not 0 < h < 0.5:
        raise DomainError(f'half-width must lie in (0, 0.5), got {h}')

    return chebyshev_sigma_bound(t, p, q)[0] / h**2


def crude_horizon_bound(c, a, h):
    """bound on the optimal stopping time of order 1/c

    Parameters
    ----------
    c : float
        cost per sample, c > 0
    a : float
        shape of the Beta(a, a) prior
    h : float
        half-width

    Returns
    -------
    int
        ceil(max(0, 1 / (4 h^2 c) - 2a - 1))
    """

    _check(a, h)
    if not c > 0:
        raise DomainError(f'cost per sample must be positive, got {c}')

    return _ceil(max(0., 1 / (4 * h**2 * c) - 2 * a - 1))


def log_horizon(c, a, h):
    """horizon after which stopping is certain, of order |log c|

    Parameters
    ----------
    c : float
        cost per sample, 0 < c <= 1
    a : float
        shape of the Beta(a, a) prior
    h : float
        half-width

    Returns
    -------
    int
        smallest N with 2 exp(-2 h^2 (N + 2a + 1)) <= c, clamped at 0
    """

    _check(a, h)
    if not 0 < c <= 1:
        raise DomainError(f'cost per sample must lie in (0, 1], got {c}')

    return _ceil(max(0., (abs(math.log(c)) + math.log(2)) / (2 * h**2) - 2 * a - 1))


def log_lower_limit(c, a, h, horizon):
    """lower limit nu before which the optimal rule never stops

    Parameters
    ----------
    c : float
        cost per sample, c > 0
    a : float
        shape of the Beta(a, a) prior
    h : float
        half-width
    horizon : int
        horizon N, normally `log_horizon(c, a, h)`

    Returns
    -------
    int
        floor of max(0, (|log c| - log((N + 2n + delta)^2 Gamma(delta))
        + log(8 (1/4 - h^2)^delta)) / |log(1/2 - h)| - 2n)

    Notes
    -----
    The limit only holds when c (N + 1) <= C_0, see `lower_limit_is_valid`.
    c <= alpha / (N + 1) is sufficient whenever alpha <= C_0.
    """

    _check(a, h)
    if not c > 0:
        raise DomainError(f'cost per sample must be positive, got {c}')

    parts = fractional_parts(a)
    n, delta = parts.n_a, parts.delta_a

    numerator = (abs(math.log(c))
                 - math.log((horizon + 2 * n + delta)**2) - log_gamma(delta)
                 + math.log(8 * (0.25 - h**2)**delta))

    return _floor(max(0., numerator / abs(math.log(0.5 - h)) - 2 * n))


def lower_limit_is_valid(c, horizon, comp_coverage_0):
    """whether c (N + 1) <= C_0, the condition behind `log_lower_limit`"""
    return c * (horizon + 1) <= comp_coverage_0


def bayes_risk_bound(t, h):
    """Chebyshev bound 1 / (4 h^2 t) on the miss probability after t samples

    Parameters
    ----------
    t : int
        number of samples, t >= 1
    h : float
        half-width

    Returns
    -------
    float
        upper bound on P(|theta_hat_t - theta| > h)
    """

    if t < 1:
        raise DomainError(f'the Bayes risk bound needs t >= 1, got {t}')
    if not 0 < h < 0.5:
        raise DomainError(f'half-width must lie in (0, 0.5), got {h}')

    return 1 / (4 * h**2 * t)


def risk_horizon(alpha, h):
    """smallest t with `bayes_risk_bound(t, h) < alpha`

    A horizon at least this large admits a calibrated cost per sample for the
    coverage target 1 - alpha.
    """

    if not 0 < alpha < 1:
        raise DomainError(f'miss probability target must lie in (0, 1), got {alpha}')

    return _floor(1 / (4 * h**2 * alpha)) + 1


def bounds_table(c, a, h):
    """every scalar bound for (c, a, h), as printed by the CLI

    Returns
    -------
    dict
        crude and logarithmic horizons, the lower limit nu at the logarithmic
        horizon, and the Chernoff bound at that horizon
    """

    horizon = log_horizon(c, a, h)

    return {'c': c,
            'a': a,
            'h': h,
            'crude_horizon_bound': crude_horizon_bound(c, a, h),
            'log_horizon': horizon,
            'log_lower_limit': log_lower_limit(c, a, h, horizon),
            'chernoff_upper_at_horizon': chernoff_upper(horizon, a, h),
            'incbeta_lower_at_1': incbeta_lower(1, a, h)}
