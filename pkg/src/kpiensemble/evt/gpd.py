"""
Generalized Pareto Distribution (GPD) of error excesses.

Mathematical context
--------------------
CDF with scale $\\sigma > 0$ and shape $k$:

$$
F(x) = 1 - (1 - kx/\\sigma)^{1/k} \\quad (k \\neq 0), \\qquad
F(x) = 1 - e^{-x/\\sigma} \\quad (k = 0)
$$

on $x \\ge 0$, bounded by $\\sigma/k$ when $k > 0$ ($k = 1$ is uniform on
$[0, \\sigma]$, $k = 0$ exponential).

With $b = k/\\sigma$ the moments satisfy $E[(1 - bX)^r] = (1 + rk)^{-1}$ for
$1 + rk > 0$. Two estimators follow:

- moments: $\\hat k = (\\bar x^2/s^2 - 1)/2$,
  $\\hat\\sigma = \\bar x (\\bar x^2/s^2 + 1)/2$;
- likelihood moments (LME): $k(b) = -\\frac1n \\sum \\ln(1 - bX_i)$ (the
  $r \\to 0$ limit) and $b$ solving
  $\\frac1n \\sum (1 - bX_i)^{-1} = (1 - k(b))^{-1}$ on $b < 1/\\max X_i$,
  then $\\hat\\sigma = \\hat k / b$.

Examples
--------
>>> gpd_cdf(0.5, GpdParams(sigma=1.0, k=1.0))
0.5
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from ..exceptions import ConfigError, DataError

logger = logging.getLogger(__name__)

__all__ = [
    "GpdParams",
    "LemmaCheck",
    "gpd_cdf",
    "gpd_ppf",
    "gpd_sample",
    "gpd_fit_moments",
    "gpd_fit_lme",
    "gpd_fit",
    "lemma_moment_check",
]

K_EPS = 1e-8
ESTIMATORS = ("lme", "moments")


@dataclass(frozen=True)
class GpdParams:
    """
    Fitted GPD parameters.

    Parameters
    ----------
    sigma : float
        Scale, positive.
    k : float
        Shape.
    estimator : {"lme", "moments"}
        Estimator that produced the values; ``"moments"`` after an LME fallback.
    """
    sigma: float
    k: float
    estimator: str = "lme"

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigError(f"sigma doit être > 0 (reçu {self.sigma}).")
        if not np.isfinite(self.k):
            raise ConfigError(f"k doit être fini (reçu {self.k}).")

    @property
    def b(self) -> float:
        """Ratio ``k / sigma``."""
        return self.k / self.sigma

    @property
    def upper_bound(self) -> float:
        """End of the support, ``sigma / k`` when ``k > 0``, infinite otherwise."""
        return self.sigma / self.k if self.k > 0 else np.inf

    def to_dict(self):
        return {"sigma": self.sigma, "k": self.k, "estimator": self.estimator}

    @classmethod
    def from_dict(cls, data):
        return cls(float(data["sigma"]), float(data["k"]), str(data.get("estimator", "lme")))


class LemmaCheck(NamedTuple):
    """Monte-Carlo moment, its closed form and the standard error of the former."""
    empirical: float
    theoretical: float
    std_error: float


def gpd_cdf(x, params: GpdParams):
    r"""
    Cumulative distribution function of the GPD.

    Parameters
    ----------
    x : float or array-like
        Points of the support: ``x >= 0`` and ``x <= sigma / k`` when ``k > 0``.
    params : GpdParams

    Returns
    -------
    float or numpy.ndarray

    Raises
    ------
    DataError
        If a point lies outside the support.

    Examples
    --------
    >>> round(gpd_cdf(1.0, GpdParams(1.0, 0.0)), 6)
    0.632121
    """
    arr = np.asarray(x, dtype=float)
    sigma, k = params.sigma, params.k
    if np.any(np.isnan(arr) | (arr < 0)):
        raise DataError("gpd_cdf : x doit être >= 0.")
    if k > 0 and np.any(arr > params.upper_bound * (1 + 1e-12)):
        raise DataError(f"gpd_cdf : x hors du support [0, {params.upper_bound}].")
    if abs(k) < K_EPS:
        out = -np.expm1(-arr / sigma)
    else:
        base = np.clip(1.0 - k * arr / sigma, 0.0, None)
        out = 1.0 - base ** (1.0 / k)
    return float(out) if np.ndim(out) == 0 else out


def gpd_ppf(u, params: GpdParams):
    """
    Quantile function, inverse of :func:`gpd_cdf` on ``[0, 1)``.

    Examples
    --------
    >>> gpd_ppf(0.5, GpdParams(2.0, 1.0))
    1.0
    """
    arr = np.asarray(u, dtype=float)
    if np.any((arr < 0) | (arr >= 1)):
        raise DataError("gpd_ppf : u doit être dans [0, 1).")
    sigma, k = params.sigma, params.k
    if abs(k) < K_EPS:
        out = -sigma * np.log1p(-arr)
    else:
        out = sigma / k * -np.expm1(k * np.log1p(-arr))
    return float(out) if np.ndim(out) == 0 else out


def gpd_sample(params: GpdParams, size: int, rng=None) -> np.ndarray:
    """
    Draw ``size`` GPD variates by inverse-transform sampling.

    Parameters
    ----------
    params : GpdParams
    size : int
    rng : numpy.random.Generator or int, optional
        Generator or seed for ``numpy.random.default_rng``.
    """
    rng = np.random.default_rng(rng)
    return gpd_ppf(rng.random(size), params)


def _check_excesses(excesses) -> np.ndarray:
    x = np.asarray(excesses, dtype=float).ravel()
    if x.size < 2:
        raise DataError(f"Au moins 2 excès requis (reçu {x.size}).")
    if not np.all(np.isfinite(x)):
        raise DataError("Excès non finis.")
    if np.any(x <= 0):
        raise DataError("Tous les excès doivent être > 0.")
    return x


def gpd_fit_moments(excesses) -> GpdParams:
    r"""
    Moment estimates of the GPD parameters.

    Parameters
    ----------
    excesses : array-like
        At least two positive values, not all equal.

    Returns
    -------
    GpdParams
        ``estimator="moments"``.

    Raises
    ------
    DataError
        On a degenerate sample (zero variance) or a non-positive excess.

    Notes
    -----
    $\hat k = (\bar x^2/s^2 - 1)/2$ and $\hat\sigma = \bar x(\bar x^2/s^2 + 1)/2$
    with $s^2$ the unbiased sample variance.
    """
    x = _check_excesses(excesses)
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    if not var > 0:
        raise DataError("Échantillon dégénéré : variance nulle.")
    ratio = mean * mean / var
    return GpdParams(sigma=mean * (ratio + 1.0) / 2.0, k=(ratio - 1.0) / 2.0, estimator="moments")


def _lme_parts(b: float, x):
    """``k(b)`` and the LME residual at ``b``."""
    bx = b * x
    k = float(-np.log1p(-bx).mean())
    if k == 1.0:
        return k, np.inf
    # mean(1/(1-bX)) - 1/(1-k), written without the two leading ones
    g = float((bx / (1.0 - bx)).mean()) - k / (1.0 - k)
    return k, g


def _first_sign_change(grid, g):
    s = np.sign(g)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    return None if idx.size == 0 else int(idx[0])


def gpd_fit_lme(excesses) -> GpdParams:
    r"""
    Likelihood-moment estimates of the GPD parameters.

    The residual $g(b)$ has a double root at $b = 0$; the sign of its leading
    term $(m_2/2 - \bar x^2)$ tells on which side the informative root lies
    (bounded tail: $b > 0$, heavy tail: $b < 0$). That side is scanned on a
    grid and the first sign change is refined with :func:`scipy.optimize.brentq`.
    A root closer to zero than the scan start gives the exponential limit
    $\hat k = 0$, $\hat\sigma = \bar x$.

    Parameters
    ----------
    excesses : array-like
        At least two positive values.

    Returns
    -------
    GpdParams
        ``estimator="lme"``, or the moment estimates (``estimator="moments"``)
        when no bracket is found.

    Raises
    ------
    DataError
        On a degenerate sample or a non-positive excess.

    Examples
    --------
    >>> rng = np.random.default_rng(0)
    >>> p = gpd_fit_lme(rng.exponential(1.0, 100_000))
    >>> abs(p.k) < 0.05 and abs(p.sigma - 1) < 0.05
    True
    """
    x = _check_excesses(excesses)
    mean = float(x.mean())
    if not float(x.var()) > 0:
        raise DataError("Échantillon dégénéré : variance nulle.")
    xmax = float(x.max())
    delta = 1e-6 / mean
    lead = float(np.mean(x * x)) / 2.0 - mean * mean

    if lead < 0:
        # bounded tail: 0 < b < 1/max(X), dense near the support end
        upper = 0.5 / xmax
        low = np.geomspace(delta, upper, 40) if delta < upper else np.array([upper])
        high = (1.0 - np.geomspace(0.5, 1e-12, 60)) / xmax
        grid = np.unique(np.r_[low, high])
        expected = -1.0
    else:
        grid = -np.geomspace(delta, 1e8 / mean, 100)
        expected = 1.0

    g = np.array([_lme_parts(b, x)[1] for b in grid])
    if np.sign(g[0]) != expected:
        logger.debug("LME : racine sous %.3g, limite exponentielle", delta)
        return GpdParams(sigma=mean, k=0.0, estimator="lme")
    i = _first_sign_change(grid, g)
    if i is None:
        logger.warning("LME : pas de changement de signe, repli sur les moments")
        return gpd_fit_moments(x)
    lo, hi = sorted((grid[i], grid[i + 1]))
    b = brentq(lambda v: _lme_parts(v, x)[1], lo, hi, xtol=1e-14 / xmax, maxiter=200)
    k = _lme_parts(b, x)[0]
    if not np.isfinite(k) or b == 0 or k / b <= 0:
        logger.warning("LME : solution invalide (b=%g, k=%g), repli sur les moments", b, k)
        return gpd_fit_moments(x)
    return GpdParams(sigma=k / b, k=k, estimator="lme")


def gpd_fit(excesses, estimator: str = "lme") -> GpdParams:
    """Dispatch to :func:`gpd_fit_lme` or :func:`gpd_fit_moments`."""
    if estimator == "lme":
        return gpd_fit_lme(excesses)
    if estimator == "moments":
        return gpd_fit_moments(excesses)
    raise ConfigError(f"Estimateur inconnu : {estimator}. Disponibles : {list(ESTIMATORS)}")


def lemma_moment_check(params: GpdParams, r: float, n_samples: int = 1_000_000, seed=0) -> LemmaCheck:
    r"""
    Monte-Carlo check of $E[(1 - bX)^r] = (1 + rk)^{-1}$.

    Parameters
    ----------
    params : GpdParams
    r : float
        Moment order, with ``1 + r * k > 0``.
    n_samples : int, default=1_000_000
    seed : int, default=0

    Returns
    -------
    LemmaCheck

    Raises
    ------
    ConfigError
        If ``1 + r * k <= 0``.

    Examples
    --------
    >>> lemma_moment_check(GpdParams(1.0, 0.5), 0.0, 1000).empirical
    1.0
    """
    if not 1.0 + r * params.k > 0:
        raise ConfigError(f"Ordre r={r} invalide : 1 + r·k doit être > 0.")
    x = gpd_sample(params, n_samples, seed)
    values = np.clip(1.0 - params.b * x, 0.0, None) ** r
    return LemmaCheck(
        empirical=float(values.mean()),
        theoretical=1.0 / (1.0 + r * params.k),
        std_error=float(values.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else np.inf,
    )
