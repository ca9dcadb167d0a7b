from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import betainc, gammaln
from scipy.stats import norm

from .errors import DomainError, NoSignChangeError, ConvergenceError

ROOT_TOL = 1e-12
ROOT_MAXITER = 200
MAXIMIZE_GRID = 1024


class BackendShim:
    """A shim that allows the array backend to be swapped at runtime.
    Taken from prysm.mathops with permission from Brandon Dube
    """

    def __init__(self, src):
        self._srcmodule = src

    def __getattr__(self, key):
        if key == "_srcmodule":
            return self._srcmodule

        return getattr(self._srcmodule, key)


_np = np
np = BackendShim(_np)


def set_backend_to_numpy():
    """Convenience method to configure tomaru's backend to numpy.

    Notes
    -----
    The lattice recursions assign into their layers in place and call into
    scipy.special, so numpy is the only supported backend.
    """
    import numpy

    np._srcmodule = numpy

    return


@dataclass(frozen=True)
class BetaParams:
    """shape parameters of a Beta(p, q) law"""
    p: float
    q: float

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise DomainError(f'Beta shapes must be positive, got p={self.p}, q={self.q}')


@dataclass(frozen=True)
class Bracket:
    """closed search interval [lo, hi] with the absolute tolerance of the search"""
    lo: float
    hi: float
    tol: float = ROOT_TOL

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f'bracket needs lo < hi, got [{self.lo}, {self.hi}]')
        if not self.tol > 0:
            raise DomainError(f'bracket tolerance must be positive, got {self.tol}')


def empty_triangle(horizon, fill=0., dtype=float):
    """Returns a triangular lattice to populate, one layer per time instant.

    Parameters
    ----------
    horizon : int
        last time instant N. The lattice holds layers t = 0, ..., N
    fill : float, optional
        value every cell starts with, by default 0
    dtype : type, optional
        dtype of the layers, by default float

    Returns
    -------
    list of numpy.ndarray
        layer t has shape (t+1,) and is indexed by the success count S_t
    """

    if horizon < 0:
        raise DomainError(f'horizon must be nonnegative, got {horizon}')

    return [np.full(t + 1, fill, dtype=dtype) for t in range(horizon + 1)]


def reg_inc_beta(x, params):
    """regularized incomplete beta function I_x(p, q), the cdf of Beta(p, q) at x

    Parameters
    ----------
    x : float or numpy.ndarray
        evaluation point(s) in [0, 1]
    params : BetaParams
        shape parameters

    Returns
    -------
    float or numpy.ndarray
        I_x(p, q)
    """

    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise DomainError(f'incomplete beta needs 0 <= x <= 1, got {x}')

    out = betainc(params.p, params.q, x)

    if out.ndim == 0:
        return float(out)

    return out


def log_gamma(x):
    """natural logarithm of the gamma function for positive arguments

    Parameters
    ----------
    x : float or numpy.ndarray
        argument, must be positive

    Returns
    -------
    float or numpy.ndarray
        log(Gamma(x))
    """

    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError(f'log gamma needs x > 0, got {x}')

    out = gammaln(x)

    if out.ndim == 0:
        return float(out)

    return out


def normal_upper_quantile(tail):
    """z such that Q(z) = tail, with Q the complementary cdf of N(0, 1)

    Parameters
    ----------
    tail : float
        upper tail probability in (0, 0.5)

    Returns
    -------
    float
        upper quantile, positive
    """

    if not 0 < tail < 0.5:
        raise DomainError(f'upper tail must lie in (0, 0.5), got {tail}')

    return float(norm.isf(tail))


def find_root(f, bracket):
    """root of a scalar function with a sign change over the bracket

    Parameters
    ----------
    f : callable
        continuous scalar function of one variable
    bracket : Bracket
        interval [lo, hi] over which f changes sign, and the absolute
        tolerance on the root

    Returns
    -------
    float
        x within bracket.tol of a sign change of f
    """

    flo = f(bracket.lo)
    fhi = f(bracket.hi)

    if flo == 0:
        return bracket.lo
    if fhi == 0:
        return bracket.hi
    if np.sign(flo) == np.sign(fhi):
        raise NoSignChangeError(f'no sign change over [{bracket.lo}, {bracket.hi}]: '
                                f'f(lo)={flo}, f(hi)={fhi}')

    root, info = brentq(f, bracket.lo, bracket.hi,
                        xtol=bracket.tol,
                        maxiter=ROOT_MAXITER,
                        full_output=True,
                        disp=False)

    if not info.converged:
        raise ConvergenceError(f'root search stopped after {info.iterations} iterations: {info.flag}')

    return root


def maximize_unimodal(f, bracket, nodes=MAXIMIZE_GRID):
    """maximize a scalar function by a grid scan followed by local refinement

    Parameters
    ----------
    f : callable
        continuous scalar function of one variable
    bracket : Bracket
        search interval, its tolerance is used for the refinement
    nodes : int, optional
        number of grid nodes of the initial scan, by default 1024

    Returns
    -------
    tuple of float
        (argmax, max). The first grid node attaining the scan maximum wins
        unless the refinement strictly improves on it, so the result is never
        below f at any scanned node
    """

    grid = np.linspace(bracket.lo, bracket.hi, nodes)
    values = np.array([f(x) for x in grid])
    best = int(np.argmax(values))
    xbest, fbest = grid[best], values[best]

    # refine between the neighbours of the best node
    left = grid[max(best - 1, 0)]
    right = grid[min(best + 1, nodes - 1)]
    result = minimize_scalar(lambda x: -f(x),
                             bounds=(left, right),
                             method='bounded',
                             options={'xatol': bracket.tol})

    if result.success and -result.fun > fbest:
        xbest, fbest = float(result.x), -float(result.fun)

    return float(xbest), float(fbest)


def composite_gauss_legendre(lo, hi, panels, nodes):
    """nodes and weights of a composite Gauss-Legendre rule on [lo, hi]

    Parameters
    ----------
    lo, hi : float
        integration limits
    panels : int
        number of equal-width panels
    nodes : int
        Gauss-Legendre nodes per panel

    Returns
    -------
    tuple of numpy.ndarray
        abscissae and weights, each of shape (panels * nodes,)
    """

    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = (edges[1:] - edges[:-1])[:, np.newaxis] / 2
    centre = (edges[1:] + edges[:-1])[:, np.newaxis] / 2

    abscissae = centre + half * x
    weights = half * w

    return abscissae.ravel(), weights.ravel()
