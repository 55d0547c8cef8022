"""
Base class of the one-step forecasters of kpiensemble.

This module defines the abstract forecaster contract shared by the ARIMA, STL
and LS-TSVR learners so that the ensemble can drive them uniformly, in batch
and in streaming mode.

Main features
-------------
- Abstract interface ``fit`` / ``predict_next``
- Streaming hook ``observe`` called after every new observation
- In-sample one-step forecasts (``fitted_values``) used to calibrate detectors
- JSON-compatible state (``get_state`` / ``set_state``) for checkpoints

Examples
--------
>>> class LastValue(BaseForecaster):
...     name = "last"
...     def fit(self, train):
...         self.model = True
...         return self
...     def predict_next(self, history):
...         return float(history[-1])
"""
from abc import ABC, abstractmethod

import numpy as np

from ..exceptions import ComputationError


class BaseForecaster(ABC):
    r"""
    Abstract base class of every learner of the ensemble.

    A forecaster is fitted once on a training span, then asked for the next
    value given the observed history. ``predict_next`` must be deterministic:
    identical fitted state and history give a bit-identical forecast.

    Attributes
    ----------
    model : object
        Fitted state (``ArimaModel``, seasonal profile, ``LsTsvrModel``), ``None``
        before ``fit``.
    name : str
        Registry key of the learner (``'arima'``, ``'stl'``, ``'lstsvr'``).

    Methods
    -------
    fit(train)
        Estimate the model on a value sequence, return ``self``.
    predict_next(history)
        One-step forecast given the values observed so far.
    observe(history)
        Advance streaming state once ``history[-1]`` has been observed.
    fitted_values(train)
        In-sample one-step forecasts (NaN where undefined).

    Notes
    -----
    - ``history`` is a 1D float array ordered oldest first, the most recent
      value last; only its last ``history_size`` values are ever read.
    """
    name = "base"

    def __init__(self):
        self.model = None

    @property
    def min_train_size(self) -> int:
        """Shortest training span accepted by ``fit``."""
        return 2

    @property
    def history_size(self) -> int:
        """Number of trailing values the learner reads from the history."""
        return 1

    def _check_fitted(self):
        if self.model is None:
            raise ComputationError(f"Le modèle {self.name} n'est pas entraîné.")

    @abstractmethod
    def fit(self, train):
        """
        Estimate the model on a training span.

        Parameters
        ----------
        train : array-like
            Contiguous values, oldest first.

        Returns
        -------
        BaseForecaster
            ``self``.
        """

    @abstractmethod
    def predict_next(self, history) -> float:
        """
        Forecast the value following ``history``.

        Parameters
        ----------
        history : numpy.ndarray
            Observed values, oldest first.

        Returns
        -------
        float
        """

    def observe(self, history):
        """Streaming update once ``history[-1]`` is known (no-op by default)."""

    def fitted_values(self, train) -> np.ndarray:
        """
        In-sample one-step forecasts, ``NaN`` where the learner cannot predict.

        The default implementation replays ``predict_next`` over every prefix;
        learners override it with a vectorized form.
        """
        self._check_fitted()
        y = np.asarray(train, dtype=float)
        out = np.full(len(y), np.nan)
        for t in range(self.history_size, len(y)):
            out[t] = self.predict_next(y[:t])
        return out

    def get_state(self) -> dict:
        """JSON-compatible fitted state."""
        raise NotImplementedError

    def set_state(self, state: dict):
        """Restore a state produced by :meth:`get_state`, return ``self``."""
        raise NotImplementedError
