"""
Seasonal-trend decomposition (STL) with Loess, and the STL one-step forecaster.

Mathematical context
--------------------
For a series $y_t$ with period $C$ and trend window $m$:

1. Trend $\\hat T_t$: centred moving average of width $m$ (an $m$-MA when $m$ is
   odd, a $2\\times m$-MA when $m$ is even, i.e. the filter applied twice).
2. Detrended series $y_t - \\hat T_t$.
3. Each cycle subseries (all samples at the same phase) is smoothed by a
   degree-1 Loess, then averaged over the periods.
4. The $C$ phase means are centred to sum to zero and tiled: $\\hat S_t$.
5. Residual $\\hat R_t = y_t - \\hat T_t - \\hat S_t$.

Loess fits, at every point, a weighted least-squares polynomial over the $k$
nearest neighbours by index, with tri-cubic weights $w = (1 - \\Delta^3)^3$ and
$\\Delta = (d - d_{min}) / (d_{max} - d_{min})$:
$\\hat\\theta = (X^T W X)^{-1} X^T W Y$.

Forecast: moving average over the last complete trend window of the observed
history (optionally carried forward along the slope of the last period) plus
the seasonal value at the next phase.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ComputationError, ConfigError, DataError
from .base import BaseForecaster

logger = logging.getLogger(__name__)

__all__ = [
    "StlDecomposition",
    "StlForecaster",
    "tricube",
    "loess_smooth",
    "moving_average_trend",
    "stl_decompose",
    "stl_predict_next",
]

EXTRAPOLATIONS = ("last", "slope")


def tricube(delta):
    """
    Tri-cubic weight ``(1 - delta**3)**3`` on ``[0, 1]``, zero beyond.

    Examples
    --------
    >>> float(tricube(0.5))
    0.669921875
    """
    delta = np.clip(np.abs(np.asarray(delta, dtype=float)), 0.0, 1.0)
    return (1.0 - delta ** 3) ** 3


@lru_cache(maxsize=4096)
def _hat_vector(k: int, shift: int, degree: int) -> np.ndarray:
    """Weights mapping the ``k`` window values to the fit at offset ``shift``."""
    x = np.arange(k, dtype=float) - shift
    dist = np.abs(x)
    span = dist.max() - dist.min()
    w = tricube((dist - dist.min()) / span) if span > 0 else np.ones(k)
    sw = np.sqrt(w)
    design = np.vander(x, degree + 1, increasing=True)
    h = np.linalg.pinv(sw[:, None] * design)[0] * sw
    h.setflags(write=False)
    return h


def loess_smooth(x, k: int, degree: int = 1) -> np.ndarray:
    r"""
    Loess smoothing with tri-cubic weights over ``k`` index neighbours.

    Parameters
    ----------
    x : array-like
        Values to smooth.
    k : int
        Neighbourhood size, ``degree + 1 <= k <= len(x)``.
    degree : {0, 1}, default=1
        Degree of the local polynomial.

    Returns
    -------
    numpy.ndarray
        Smoothed values, same length as ``x``.

    Raises
    ------
    ConfigError
        If ``k`` or ``degree`` is out of range.

    Examples
    --------
    >>> loess_smooth([0.0, 1.0, 2.0, 3.0, 4.0], k=3)
    array([0., 1., 2., 3., 4.])
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if degree not in (0, 1):
        raise ConfigError(f"Degré Loess invalide : {degree} (0 ou 1).")
    if not degree + 1 <= k <= n:
        raise ConfigError(f"Voisinage Loess invalide : k={k} pour {n} points (degré {degree}).")
    half = k // 2
    out = np.empty(n)
    # points whose window is centred
    out[half:n - k + half + 1] = sliding_window_view(x, k) @ _hat_vector(k, half, degree)
    for i in range(half):
        out[i] = x[:k] @ _hat_vector(k, i, degree)
    for i in range(n - k + half + 1, n):
        out[i] = x[n - k:] @ _hat_vector(k, i - (n - k), degree)
    return out


def _trend_weights(m: int) -> np.ndarray:
    if m < 2:
        raise ConfigError(f"La fenêtre de tendance doit être >= 2 (reçu {m}).")
    if m % 2:
        return np.full(m, 1.0 / m)
    return np.r_[0.5, np.ones(m - 1), 0.5] / m


def moving_average_trend(x, m: int) -> np.ndarray:
    """
    Centred moving average, NaN on the ``m // 2`` points at each end.

    Odd ``m``: plain ``m``-MA. Even ``m``: ``2 x m``-MA, weights
    ``[1/2, 1, ..., 1, 1/2] / m``.
    """
    x = np.asarray(x, dtype=float)
    weights = _trend_weights(m)
    if len(x) < len(weights):
        raise DataError(f"Série trop courte ({len(x)}) pour une moyenne mobile de {m}.")
    half = m // 2
    trend = np.full(len(x), np.nan)
    trend[half:len(x) - half] = np.convolve(x, weights, mode="valid")
    return trend


@dataclass(frozen=True, eq=False)
class StlDecomposition:
    """
    Trend, seasonal and residual components of a series.

    ``trend`` and ``residual`` are NaN where the moving average is undefined;
    ``seasonal`` is defined everywhere and repeats with period ``period``.
    """
    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray
    period: int
    trend_window: int

    def __len__(self):
        return len(self.seasonal)

    @property
    def profile(self) -> np.ndarray:
        """Seasonal values of one period, phase 0 first."""
        return self.seasonal[:self.period]

    @property
    def last_trend_index(self) -> int:
        defined = np.flatnonzero(~np.isnan(self.trend))
        if defined.size == 0:
            raise ComputationError("Décomposition vide : aucune tendance définie.")
        return int(defined[-1])


def stl_decompose(x, period: int, trend_window: int = None, loess_span: int = None,
                  loess_degree: int = 1) -> StlDecomposition:
    r"""
    Decompose a series into trend, seasonal and residual components.

    Parameters
    ----------
    x : array-like
        At least ``2 * period`` values.
    period : int
        Cycle length ``C``.
    trend_window : int, optional
        Moving-average width ``m >= 2``; defaults to ``period``.
    loess_span : int, optional
        Loess neighbourhood on each cycle subseries; defaults to the whole
        subseries.
    loess_degree : {0, 1}, default=1

    Returns
    -------
    StlDecomposition

    Raises
    ------
    DataError
        If the series is shorter than two periods.
    ConfigError
        If a window is invalid.

    Examples
    --------
    >>> t = np.arange(96)
    >>> dec = stl_decompose(np.sin(2 * np.pi * t / 24), period=24)
    >>> bool(np.nanmax(np.abs(dec.residual)) < 1e-6)
    True
    """
    x = np.asarray(x, dtype=float)
    if period < 1:
        raise ConfigError(f"Période invalide : {period}")
    if len(x) < 2 * period:
        raise DataError(f"STL : au moins 2 périodes requises ({2 * period} points, reçu {len(x)}).")
    m = period if trend_window is None else int(trend_window)
    if m < 2:
        raise ConfigError(f"La fenêtre de tendance doit être >= 2 (reçu {m}).")
    trend = moving_average_trend(x, m)
    detrended = x - trend

    means = np.empty(period)
    for phase in range(period):
        sub = detrended[phase::period]
        sub = sub[~np.isnan(sub)]
        if sub.size == 0:
            raise ConfigError(f"Fenêtre de tendance {m} trop large : la phase {phase} n'a aucune valeur.")
        k = sub.size if loess_span is None else min(int(loess_span), sub.size)
        degree = loess_degree if k > loess_degree else 0
        means[phase] = loess_smooth(sub, max(k, degree + 1), degree).mean()
    means -= means.mean()
    seasonal = np.resize(means, len(x))
    residual = x - trend - seasonal
    return StlDecomposition(trend, seasonal, residual, int(period), m)


def _trend_slope(decomp: StlDecomposition, last: int) -> float:
    back = max(last - decomp.period, int(np.flatnonzero(~np.isnan(decomp.trend))[0]))
    if back == last:
        return 0.0
    return (decomp.trend[last] - decomp.trend[back]) / (last - back)


def stl_predict_next(decomp: StlDecomposition, history, extrapolation: str = "last") -> float:
    """
    Forecast the value following ``history``.

    ``history`` starts at the first value the decomposition was computed on;
    the next value has phase ``len(history) mod period``.

    Parameters
    ----------
    decomp : StlDecomposition
    history : array-like
    extrapolation : {"last", "slope"}, default="last"
        Trend term: last defined value, or that value extended along the
        average slope of the last period.

    Raises
    ------
    ComputationError
        If the decomposition is empty.
    """
    if len(decomp) == 0:
        raise ComputationError("Décomposition vide.")
    if extrapolation not in EXTRAPOLATIONS:
        raise ConfigError(f"Extrapolation inconnue : {extrapolation}")
    last = decomp.last_trend_index
    level = decomp.trend[last]
    if extrapolation == "slope":
        level += _trend_slope(decomp, last) * (len(history) - last)
    return float(level + decomp.profile[len(history) % decomp.period])


def _causal_level(history, weights: np.ndarray, period: int, extrapolation: str) -> float:
    """Trend term for the value after ``history``, from its last complete moving-average window."""
    x = np.asarray(history, dtype=float)
    span = len(weights)
    if len(x) < span:
        raise DataError(f"Historique trop court pour STL : {span} points requis.")
    level = float(x[len(x) - span:] @ weights)
    if extrapolation == "slope":
        half = span // 2
        last = len(x) - 1 - half
        back = max(last - period, half)
        if back < last:
            prev = float(x[back - half:back - half + span] @ weights)
            level += (level - prev) / (last - back) * (half + 1)
    return level


class StlForecaster(BaseForecaster):
    r"""
    STL learner of the ensemble.

    The seasonal profile is estimated at ``fit`` and refreshed every
    ``refresh_every`` observed points on the last ``history_periods``
    periods. The trend term is re-read at every step from the last complete
    moving-average window of the history, so a forecast only uses values
    already observed and :meth:`fitted_values` replays exactly the forecast
    made in streaming.

    The forecaster is position-driven: the phase of the next value is kept
    internally and advanced by :meth:`observe`, because the history handed
    over in streaming is a bounded buffer whose length says nothing about the
    phase.

    Parameters
    ----------
    period : int, default=1440
        Cycle length (one day at one-minute sampling).
    trend_window : int, optional
        Moving-average width, defaults to ``period``.
    loess_span : int, optional
        Loess neighbourhood on each cycle subseries.
    extrapolation : {"last", "slope"}, default="last"
        Trend term: last complete moving-average value, or that value carried
        to the next point along the slope of the last period.
    history_periods : int, default=6
        Periods used at each refresh.
    refresh_every : int, optional
        Refresh cadence in points, defaults to ``period``.
    """
    name = "stl"

    def __init__(self, period: int = 1440, trend_window: int = None, loess_span: int = None,
                 extrapolation: str = "last", history_periods: int = 6, refresh_every: int = None):
        super().__init__()
        if period < 1:
            raise ConfigError(f"Période invalide : {period}")
        if extrapolation not in EXTRAPOLATIONS:
            raise ConfigError(f"Extrapolation inconnue : {extrapolation}")
        if history_periods < 2:
            raise ConfigError("history_periods doit être >= 2.")
        self.period = int(period)
        self.trend_window = int(trend_window) if trend_window else self.period
        self.loess_span = loess_span
        self.extrapolation = extrapolation
        self.history_periods = int(history_periods)
        self.refresh_every = int(refresh_every) if refresh_every else self.period
        self._weights = _trend_weights(self.trend_window)
        self._offset = 0
        self._since_refresh = 0

    @property
    def min_train_size(self) -> int:
        return 2 * self.period

    @property
    def history_size(self) -> int:
        return max(self.history_periods * self.period, len(self._weights) + self.period)

    def _decompose(self, values):
        values = np.asarray(values, dtype=float)[-self.history_size:]
        decomp = stl_decompose(values, self.period, self.trend_window, self.loess_span)
        self.model = {
            "profile": decomp.profile.copy(),
            "phase": len(values) % self.period,
        }
        self._since_refresh = 0
        return decomp

    def fit(self, train):
        n = len(train)
        self.decomposition_ = self._decompose(train)
        self._offset = n - len(self.decomposition_)
        return self

    def predict_next(self, history) -> float:
        self._check_fitted()
        level = _causal_level(history, self._weights, self.period, self.extrapolation)
        return float(level + self.model["profile"][self.model["phase"]])

    def observe(self, history):
        self._check_fitted()
        self.model["phase"] = (self.model["phase"] + 1) % self.period
        self._since_refresh += 1
        if self._since_refresh >= self.refresh_every and len(history) >= 2 * self.period:
            self._decompose(history)
            logger.debug("STL : profil saisonnier rafraîchi")

    def fitted_values(self, train) -> np.ndarray:
        """
        One-step forecasts over ``train`` with the fitted profile.

        ``train`` starts where the training span of :meth:`fit` started. Entry
        ``t`` is what :meth:`predict_next` returns on ``train[:t]``; NaN until
        the first complete moving-average window.
        """
        self._check_fitted()
        y = np.asarray(train, dtype=float)
        span = len(self._weights)
        half = span // 2
        out = np.full(len(y), np.nan)
        if len(y) <= span:
            return out
        trend = moving_average_trend(y, self.trend_window)
        t = np.arange(span, len(y))
        last = t - 1 - half
        level = trend[last]
        if self.extrapolation == "slope":
            back = np.maximum(last - self.period, half)
            moved = back < last
            slope = np.zeros(len(t))
            slope[moved] = (level[moved] - trend[back[moved]]) / (last[moved] - back[moved])
            level = level + slope * (half + 1)
        out[span:] = level + self.model["profile"][(t - self._offset) % self.period]
        return out

    def get_state(self):
        self._check_fitted()
        return {
            "profile": [float(v) for v in self.model["profile"]],
            "phase": int(self.model["phase"]),
            "since_refresh": self._since_refresh,
        }

    def set_state(self, state):
        self.model = {
            "profile": np.asarray(state["profile"], dtype=float),
            "phase": int(state["phase"]),
        }
        self._since_refresh = int(state["since_refresh"])
        return self
