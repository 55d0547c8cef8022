"""
Evaluation utilities of kpiensemble: forecast accuracy and windowed
precision / recall / F1 of anomaly detections.

Mathematical Formulation
------------------------
Forecast accuracy on $n$ points:

.. math::
    \\mathrm{MSE} = \\frac1n \\sum (y_i - \\hat y_i)^2, \\qquad
    \\mathrm{MAE} = \\frac1n \\sum |y_i - \\hat y_i|

Detections are scored with a tolerance window: a predicted anomaly at index
$p$ matches a ground-truth anomaly at $g$ when $|p - g| \\le T$. With $TP$ the
number of matches, $FP$ the unmatched predictions and $FN$ the unmatched
truths:

.. math::
    \\mathrm{precision} = \\frac{TP}{TP + FP}, \\quad
    \\mathrm{recall} = \\frac{TP}{TP + FN}, \\quad
    F_1 = \\frac{2 \\cdot \\mathrm{precision} \\cdot \\mathrm{recall}}{\\mathrm{precision} + \\mathrm{recall}}

A zero denominator gives 0.

Matching is one-to-one by default: predictions are taken in ascending order
and each one takes the earliest unmatched truth within $T$. On a line this
greedy order yields a maximum matching. The many-to-one variant counts a
prediction as correct when any truth lies within $T$, and a truth as found when
any prediction does.

Examples
--------
>>> windowed_prf([103, 500], [100], T=7).f1
0.6666666666666666
>>> forecast_metrics([0, 0], [1, -1])
(1.0, 1.0)
"""

from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np
from sklearn.metrics import mean_absolute_error, mean_squared_error

from .exceptions import ConfigError, DataError

__all__ = ["EvalResult", "windowed_prf", "forecast_metrics", "Evaluator"]

DEFAULT_T = 7


@dataclass(frozen=True)
class EvalResult:
    """Confusion counts and scores of a windowed evaluation."""
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    t_window: int

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


def _indices(values, what: str) -> np.ndarray:
    arr = np.unique(np.asarray(list(values), dtype=np.int64))
    if arr.size and arr[0] < 0:
        raise DataError(f"Indices {what} négatifs : {int(arr[0])}")
    return arr


def windowed_prf(pred_indices, truth_indices, T: int = DEFAULT_T, one_to_one: bool = True) -> EvalResult:
    """
    Precision, recall and F1 with a ``T``-step tolerance window.

    Parameters
    ----------
    pred_indices : iterable of int
        Positions flagged by the detector (duplicates are ignored).
    truth_indices : iterable of int
        Positions labelled anomalous.
    T : int, default=7
        Matching tolerance, ``T >= 0``; ``T = 0`` is exact set intersection.
    one_to_one : bool, default=True
        One truth matches at most one prediction. ``False`` selects the
        many-to-one variant.

    Returns
    -------
    EvalResult

    Raises
    ------
    ConfigError
        If ``T`` is negative.
    DataError
        If an index is negative.

    Examples
    --------
    >>> r = windowed_prf([103], [100], T=7)
    >>> (r.tp, r.fp, r.fn, r.f1)
    (1, 0, 0, 1.0)
    >>> windowed_prf([120], [100], T=7).f1
    0.0
    """
    if T < 0:
        raise ConfigError(f"T doit être >= 0 (reçu {T}).")
    pred = _indices(pred_indices, "prédits")
    truth = _indices(truth_indices, "de vérité terrain")

    if one_to_one:
        tp = 0
        j = 0
        for p in pred:
            # truths left behind can no longer be reached by later predictions
            while j < truth.size and truth[j] < p - T:
                j += 1
            if j < truth.size and truth[j] <= p + T:
                tp += 1
                j += 1
        fp = pred.size - tp
        fn = truth.size - tp
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
    else:
        pred_hit = _covered(pred, truth, T)
        truth_hit = _covered(truth, pred, T)
        tp = int(pred_hit.sum())
        fp = pred.size - tp
        fn = int(truth.size - truth_hit.sum())
        precision = _ratio(tp, pred.size)
        recall = _ratio(int(truth_hit.sum()), truth.size)

    f1 = _ratio(2 * precision * recall, precision + recall) if precision + recall > 0 else 0.0
    return EvalResult(int(tp), int(fp), int(fn), precision, recall, f1, int(T))


def _covered(points: np.ndarray, others: np.ndarray, T: int) -> np.ndarray:
    """Whether each point has at least one of ``others`` within ``T``."""
    if others.size == 0:
        return np.zeros(points.size, dtype=bool)
    lo = np.searchsorted(others, points - T, side="left")
    hi = np.searchsorted(others, points + T, side="right")
    return hi > lo


def forecast_metrics(actual, predicted) -> Tuple[float, float]:
    """
    Mean squared and mean absolute one-step forecast errors.

    Parameters
    ----------
    actual, predicted : array-like
        Same length, at least one value.

    Returns
    -------
    (float, float)
        ``(mse, mae)``.

    Raises
    ------
    DataError
        On a length mismatch or empty input.

    Examples
    --------
    >>> forecast_metrics([0], [3])
    (9.0, 3.0)
    """
    y = np.asarray(actual, dtype=float).ravel()
    y_hat = np.asarray(predicted, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise DataError(f"Longueurs différentes : {y.size} valeurs réelles, {y_hat.size} prédictions.")
    if y.size == 0:
        raise DataError("forecast_metrics : séquences vides.")
    return float(mean_squared_error(y, y_hat)), float(mean_absolute_error(y, y_hat))


class Evaluator:
    r"""
    Utility class for evaluating forecasters and detectors.

    Provides static methods returning plain dicts, ready for JSON reports.
    """
    @staticmethod
    def evaluate_all(pred_indices, truth_indices, T: int = DEFAULT_T, one_to_one: bool = True):
        """
        Windowed precision, recall and F1 of a detection run.

        Returns
        -------
        dict
            Keys 'tp', 'fp', 'fn', 'precision', 'recall', 'f1', 't_window'.

        Examples
        --------
        >>> Evaluator.evaluate_all([103], [100])["f1"]
        1.0
        """
        return windowed_prf(pred_indices, truth_indices, T, one_to_one).to_dict()

    @staticmethod
    def forecast(actual, predicted):
        """
        MSE and MAE of one-step forecasts.

        Returns
        -------
        dict
            Keys 'mse', 'mae'.
        """
        mse, mae = forecast_metrics(actual, predicted)
        return {"mse": mse, "mae": mae}
