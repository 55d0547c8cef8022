"""
ARIMA(p, d, q) one-step forecaster estimated by the Hannan-Rissanen procedure.

Mathematical context
--------------------
With the back-shift operator $B y_t = y_{t-1}$ and $w_t = (1 - B)^d y_t$:

$$
(1 - \\phi_1 B - \\cdots - \\phi_p B^p)\\, w_t = c + (1 + \\theta_1 B + \\cdots + \\theta_q B^q)\\, \\varepsilon_t
$$

Estimation (closed form, no iterative likelihood):

1. Long autoregression of order $m = \\min(20, n/10)$ on $w$ by least squares;
   its residuals are proxies of $\\varepsilon_t$ (only when $q > 0$).
2. Least-squares regression of $w_t$ on a constant, $w_{t-1..t-p}$ and the
   residual proxies $\\hat\\varepsilon_{t-1..t-q}$.

The forecast of $w_{t+1}$ is integrated back to the original scale by adding
the last value of every differencing level.

Examples
--------
>>> model = ArimaModel(p=1, d=1, q=0, phi=(0.5,), theta=(), c=0.0, recent_residuals=())
>>> arima_predict_next(model, [1.0, 3.0, 5.0])
6.0
"""

import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np
from scipy.signal import lfilter
from statsmodels.tsa.tsatools import lagmat

from ..exceptions import ComputationError, ConfigError, DataError
from .base import BaseForecaster

logger = logging.getLogger(__name__)

__all__ = [
    "ArimaModel",
    "ArimaForecaster",
    "difference",
    "integrate",
    "arima_fit",
    "arima_predict_next",
    "arima_update",
]


@dataclass(frozen=True)
class ArimaModel:
    """
    Fitted ARIMA coefficients and the residual memory of the MA part.

    Parameters
    ----------
    p, d, q : int
        Orders.
    phi : tuple of float
        AR coefficients ``phi_1 .. phi_p``.
    theta : tuple of float
        MA coefficients ``theta_1 .. theta_q``.
    c : float
        Constant of the differenced recursion.
    recent_residuals : tuple of float
        Last ``q`` one-step residuals, oldest first.
    """
    p: int
    d: int
    q: int
    phi: Tuple[float, ...]
    theta: Tuple[float, ...]
    c: float
    recent_residuals: Tuple[float, ...]

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ConfigError(f"Ordres ARIMA négatifs : ({self.p}, {self.d}, {self.q})")
        if len(self.phi) != self.p or len(self.theta) != self.q:
            raise ConfigError("Le nombre de coefficients ne correspond pas aux ordres (p, q).")
        if len(self.recent_residuals) != self.q:
            raise ConfigError("recent_residuals doit contenir q valeurs.")

    def to_dict(self):
        return {
            "p": self.p, "d": self.d, "q": self.q,
            "phi": list(self.phi), "theta": list(self.theta), "c": self.c,
            "recent_residuals": list(self.recent_residuals),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            p=int(data["p"]), d=int(data["d"]), q=int(data["q"]),
            phi=tuple(float(v) for v in data["phi"]),
            theta=tuple(float(v) for v in data["theta"]),
            c=float(data["c"]),
            recent_residuals=tuple(float(v) for v in data["recent_residuals"]),
        )


def difference(x, d: int) -> np.ndarray:
    """
    Apply first differencing ``d`` times.

    Raises
    ------
    DataError
        If ``len(x) <= d``.

    Examples
    --------
    >>> difference([1, 2, 4, 7], 2)
    array([1., 1.])
    """
    x = np.asarray(x, dtype=float)
    if d < 0:
        raise ConfigError(f"d doit être positif (reçu {d}).")
    if len(x) <= d:
        raise DataError(f"Série trop courte ({len(x)} points) pour un différenciement d'ordre {d}.")
    return np.diff(x, n=d) if d > 0 else x.copy()


def integrate(w, initial) -> np.ndarray:
    """
    Inverse of :func:`difference`.

    Parameters
    ----------
    w : array-like
        Differenced values.
    initial : array-like of length d
        First ``d`` values of the original series.

    Examples
    --------
    >>> integrate(difference([1, 2, 4, 7], 2), [1, 2])
    array([1., 2., 4., 7.])
    """
    w = np.asarray(w, dtype=float)
    initial = np.asarray(initial, dtype=float)
    d = initial.size
    if d == 0:
        return w.copy()
    # first value of each differencing level 0..d-1
    heads = [difference(initial, j)[0] for j in range(d)]
    level = w
    for j in reversed(range(d)):
        level = np.concatenate(([heads[j]], heads[j] + np.cumsum(level)))
    return level


def _lstsq(X, y, what):
    try:
        beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise ComputationError(f"Régression {what} : système singulier ({exc}).") from exc
    if not np.all(np.isfinite(beta)):
        raise ComputationError(f"Régression {what} : coefficients non finis.")
    if rank < X.shape[1]:
        logger.debug("Régression %s de rang %d < %d, solution de norme minimale", what, rank, X.shape[1])
    return beta


def arima_fit(train, p: int = 5, d: int = 1, q: int = 0) -> ArimaModel:
    r"""
    Estimate an ARIMA(p, d, q) model with the Hannan-Rissanen procedure.

    Parameters
    ----------
    train : array-like
        Training values, at least ``p + q + d + 20`` of them.
    p, d, q : int, default=(5, 1, 0)
        Orders.

    Returns
    -------
    ArimaModel
        Coefficients plus the last ``q`` residuals of the fitted recursion.

    Raises
    ------
    DataError
        If the training span is too short.
    ComputationError
        If a regression cannot be solved.

    Notes
    -----
    A rank-deficient regression (e.g. a noise-free sinusoid, whose lags span a
    plane) is solved in the minimum-norm least-squares sense.

    Examples
    --------
    >>> model = arima_fit(np.full(50, 3.0), p=1, d=1, q=0)
    >>> model.phi, model.c
    ((0.0,), 0.0)
    """
    if min(p, d, q) < 0:
        raise ConfigError(f"Ordres ARIMA négatifs : ({p}, {d}, {q})")
    y = np.asarray(train, dtype=float)
    if len(y) < p + q + d + 20:
        raise DataError(
            f"ARIMA({p},{d},{q}) : au moins {p + q + d + 20} points requis (reçu {len(y)})."
        )
    w = difference(y, d)
    n = len(w)
    if not np.any(w):
        return ArimaModel(p, d, q, (0.0,) * p, (0.0,) * q, 0.0, (0.0,) * q)

    resid = np.zeros(n)
    start = p
    if q > 0:
        m = max(1, min(20, n // 10))
        X1 = np.column_stack([np.ones(n - m), lagmat(w, m, trim="both")])
        beta1 = _lstsq(X1, w[m:], "AR longue")
        resid = np.full(n, np.nan)
        resid[m:] = w[m:] - X1 @ beta1
        start = max(p, m + q)

    columns = [np.ones(n - start)]
    if p > 0:
        columns.append(lagmat(w, start, trim="both")[:, :p])
    if q > 0:
        columns.append(lagmat(resid, start, trim="both")[:, :q])
    X2 = np.column_stack(columns)
    beta = _lstsq(X2, w[start:], "Hannan-Rissanen")
    c = float(beta[0])
    phi = tuple(float(v) for v in beta[1:1 + p])
    theta = tuple(float(v) for v in beta[1 + p:])

    eps = _fitted_residuals(w, c, phi, theta)
    recent = tuple(float(v) for v in eps[n - q:]) if q > 0 else ()
    logger.debug("ARIMA(%d,%d,%d) : c=%.4g phi=%s theta=%s", p, d, q, c, phi, theta)
    return ArimaModel(p, d, q, phi, theta, c, recent)


def _fitted_residuals(w, c, phi, theta) -> np.ndarray:
    """Residuals of the fitted recursion over ``w``; zero before lag ``p``."""
    p = len(phi)
    u = np.zeros(len(w))
    if p > 0:
        u[p:] = w[p:] - c - lagmat(w, p, trim="both") @ np.asarray(phi)
    else:
        u = w - c
    # e_t + theta_1 e_{t-1} + ... = u_t
    return lfilter([1.0], np.r_[1.0, theta], u)


def arima_predict_next(model: ArimaModel, history) -> float:
    """
    One-step forecast on the original scale.

    Parameters
    ----------
    model : ArimaModel
    history : array-like
        Observed values, at least ``p + d`` of them.

    Returns
    -------
    float

    Raises
    ------
    DataError
        If the history is too short.

    Examples
    --------
    >>> model = ArimaModel(0, 1, 0, (), (), 0.0, ())
    >>> arima_predict_next(model, [5.0, 7.0])
    7.0
    """
    p, d = model.p, model.d
    if len(history) < max(p + d, 1):
        raise DataError(f"Historique trop court pour ARIMA : {max(p + d, 1)} points requis.")
    tail = np.asarray(history[len(history) - (p + d):], dtype=float) if p + d > 0 else np.empty(0)
    forecast = model.c
    if p > 0:
        w = difference(tail, d) if d > 0 else tail
        forecast += float(np.dot(model.phi, w[::-1]))
    if model.q > 0:
        forecast += float(np.dot(model.theta, model.recent_residuals[::-1]))
    for j in range(d):
        forecast += float(difference(tail, j)[-1])
    return float(forecast)


def arima_update(model: ArimaModel, history, actual: float) -> ArimaModel:
    """
    Roll the MA residual memory after observing ``actual``.

    ``history`` is the series before ``actual``. The residual is the same on
    the differenced and the original scale. O(p + q).
    """
    if model.q == 0:
        return model
    residual = float(actual) - arima_predict_next(model, history)
    recent = (model.recent_residuals + (residual,))[-model.q:]
    return replace(model, recent_residuals=recent)


class ArimaForecaster(BaseForecaster):
    r"""
    ARIMA learner of the ensemble.

    Parameters
    ----------
    p, d, q : int, default=(5, 1, 0)
        Orders; no automatic order selection.

    Examples
    --------
    >>> f = ArimaForecaster(p=2, d=1, q=0).fit(train)
    >>> f.predict_next(train)
    """
    name = "arima"

    def __init__(self, p: int = 5, d: int = 1, q: int = 0):
        super().__init__()
        if min(p, d, q) < 0:
            raise ConfigError(f"Ordres ARIMA négatifs : ({p}, {d}, {q})")
        self.p, self.d, self.q = int(p), int(d), int(q)

    @property
    def min_train_size(self) -> int:
        return self.p + self.q + self.d + 20

    @property
    def history_size(self) -> int:
        return max(self.p + self.d, 1)

    def fit(self, train):
        self.model = arima_fit(train, self.p, self.d, self.q)
        return self

    def predict_next(self, history) -> float:
        self._check_fitted()
        return arima_predict_next(self.model, history)

    def observe(self, history):
        self._check_fitted()
        if self.q > 0:
            self.model = arima_update(self.model, history[:-1], history[-1])

    def fitted_values(self, train) -> np.ndarray:
        """In-sample one-step forecasts; NaN before lag ``p + d``."""
        self._check_fitted()
        y = np.asarray(train, dtype=float)
        m = self.model
        w = difference(y, m.d)
        eps = _fitted_residuals(w, m.c, m.phi, m.theta)
        out = np.full(len(y), np.nan)
        start = m.p + m.d
        out[start:] = y[start:] - eps[m.p:]
        return out

    def get_state(self):
        self._check_fitted()
        return {"model": self.model.to_dict()}

    def set_state(self, state):
        self.model = ArimaModel.from_dict(state["model"])
        return self
