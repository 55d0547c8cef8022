"""
Time-series data model of kpiensemble.

A KPI is held as an immutable :class:`Series` of :class:`TimePoint` samples on a
regular grid (gaps allowed, never imputed). This module also carries the
zero-mean normalization used in front of the learners and the descriptive
statistics used for data probing.

Mathematical context
--------------------
- Zero-mean normalization: $x' = (x - \\mu) / \\sigma$
- Standard deviation: population convention (divide by $n$) everywhere, so a
  normalized series has standard deviation exactly 1.
- Quantiles: linear interpolation between order statistics.

Examples
--------
>>> s = Series.from_arrays("kpi", [0, 60, 120], [1.0, 2.0, 3.0])
>>> z, params = normalize(s)
>>> abs(describe(z).mean) < 1e-9
True
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from ..exceptions import DataError

__all__ = [
    "TimePoint",
    "Series",
    "NormalizationParams",
    "SeriesStats",
    "normalize",
    "denormalize",
    "describe",
    "modal_interval",
]


@dataclass(frozen=True)
class TimePoint:
    """
    One KPI sample.

    Parameters
    ----------
    timestamp : int
        Epoch seconds.
    value : float
        Observed value (finite).
    label : bool or None
        Ground truth, ``True`` for an anomalous point.
    """
    timestamp: int
    value: float
    label: Optional[bool] = None


def modal_interval(timestamps) -> int:
    """Most frequent gap between consecutive timestamps (smallest on ties)."""
    gaps = np.diff(np.asarray(timestamps, dtype=np.int64))
    if gaps.size == 0:
        raise DataError("Impossible d'inférer l'intervalle d'une série d'un seul point.")
    values, counts = np.unique(gaps, return_counts=True)
    return int(values[np.argmax(counts)])


@dataclass(frozen=True)
class Series:
    r"""
    An ordered, immutable KPI time series.

    Parameters
    ----------
    id : str
        KPI identifier.
    points : tuple of TimePoint
        Samples with strictly increasing timestamps.
    interval : int
        Sampling interval in seconds; every gap is a positive multiple of it.

    Raises
    ------
    DataError
        If the series is empty, unordered, off-grid or holds a non-finite value.

    Examples
    --------
    >>> s = Series.from_arrays("cpu", [0, 60, 180], [0.5, 0.7, 0.6])
    >>> s.interval, len(s)
    (60, 3)
    """
    id: str
    points: Tuple[TimePoint, ...]
    interval: int

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise DataError(f"La série {self.id!r} est vide.")
        if int(self.interval) <= 0:
            raise DataError(f"Intervalle invalide pour {self.id!r} : {self.interval}")
        object.__setattr__(self, "interval", int(self.interval))
        ts = self.timestamps
        gaps = np.diff(ts)
        if np.any(gaps <= 0):
            i = int(np.flatnonzero(gaps <= 0)[0]) + 1
            raise DataError(f"Horodatages non strictement croissants dans {self.id!r} (point {i}).")
        if np.any(gaps % self.interval != 0):
            i = int(np.flatnonzero(gaps % self.interval != 0)[0]) + 1
            raise DataError(
                f"Écart non multiple de l'intervalle {self.interval}s dans {self.id!r} (point {i})."
            )
        if not np.all(np.isfinite(self.values)):
            i = int(np.flatnonzero(~np.isfinite(self.values))[0])
            raise DataError(f"Valeur non finie dans {self.id!r} (point {i}).")

    @classmethod
    def from_arrays(cls, id, timestamps, values, labels=None, interval=None) -> "Series":
        """
        Build a series from parallel sequences.

        Parameters
        ----------
        id : str
            KPI identifier.
        timestamps : sequence of int
            Epoch seconds, strictly increasing.
        values : sequence of float
            Observed values.
        labels : sequence of bool, optional
            Ground-truth flags.
        interval : int, optional
            Sampling interval; inferred as the modal gap when omitted.

        Returns
        -------
        Series
        """
        timestamps = [int(t) for t in timestamps]
        values = [float(v) for v in values]
        if len(timestamps) != len(values):
            raise DataError("timestamps et values doivent avoir la même longueur.")
        if labels is None:
            labels = [None] * len(values)
        elif len(labels) != len(values):
            raise DataError("labels et values doivent avoir la même longueur.")
        if interval is None:
            interval = modal_interval(timestamps)
        points = tuple(
            TimePoint(t, v, None if l is None else bool(l))
            for t, v, l in zip(timestamps, values, labels)
        )
        return cls(str(id), points, interval)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @cached_property
    def timestamps(self) -> np.ndarray:
        ts = np.fromiter((p.timestamp for p in self.points), dtype=np.int64, count=len(self.points))
        ts.setflags(write=False)
        return ts

    @cached_property
    def values(self) -> np.ndarray:
        vs = np.fromiter((p.value for p in self.points), dtype=float, count=len(self.points))
        vs.setflags(write=False)
        return vs

    @property
    def labels(self) -> Optional[np.ndarray]:
        """Boolean label array, or ``None`` when the series is unlabeled."""
        if all(p.label is None for p in self.points):
            return None
        return np.array([bool(p.label) for p in self.points])

    @property
    def anomaly_indices(self) -> np.ndarray:
        """Positions whose label is ``True``."""
        labels = self.labels
        if labels is None:
            return np.empty(0, dtype=int)
        return np.flatnonzero(labels)

    def with_values(self, values) -> "Series":
        """Same timestamps, labels and interval with new values."""
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self),):
            raise DataError("Le nombre de valeurs ne correspond pas à la série.")
        points = tuple(TimePoint(p.timestamp, float(v), p.label) for p, v in zip(self.points, values))
        return Series(self.id, points, self.interval)

    def slice(self, start=None, stop=None) -> "Series":
        """Contiguous sub-series by position."""
        return Series(self.id, self.points[start:stop], self.interval)

    def to_frame(self) -> pd.DataFrame:
        """Tabular view with columns ``timestamp``, ``value`` and ``label``."""
        return pd.DataFrame({
            "timestamp": self.timestamps,
            "value": self.values,
            "label": [p.label for p in self.points],
        })


@dataclass(frozen=True)
class NormalizationParams:
    """Mean and (population) standard deviation of a normalized series."""
    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)) or self.sigma <= 0:
            raise DataError(f"Paramètres de normalisation invalides : mu={self.mu}, sigma={self.sigma}")

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self.mu) / self.sigma

    def invert(self, x):
        return np.asarray(x, dtype=float) * self.sigma + self.mu


@dataclass(frozen=True)
class SeriesStats:
    """Count, mean, std and five-number summary of a series."""
    count: int
    mean: float
    std: float
    min: float
    q25: float
    q50: float
    q75: float
    max: float

    def as_table(self) -> pd.Series:
        """Statistics labelled like a KPI probing table."""
        return pd.Series({
            "Count": self.count, "Avg": self.mean, "Std": self.std, "Min": self.min,
            "25%": self.q25, "50%": self.q50, "75%": self.q75, "Max": self.max,
        })


def normalize(series: Series) -> Tuple[Series, NormalizationParams]:
    r"""
    Zero-mean, unit-variance normalization.

    Parameters
    ----------
    series : Series
        At least two points, not all equal.

    Returns
    -------
    (Series, NormalizationParams)
        The normalized series and the parameters for :func:`denormalize`.

    Raises
    ------
    DataError
        If the series has fewer than two points or is constant.

    Notes
    -----
    $x' = (x - \mu)/\sigma$ with $\sigma$ the population standard deviation.

    Examples
    --------
    >>> z, p = normalize(Series.from_arrays("k", [0, 60, 120], [1, 2, 3]))
    >>> round(p.sigma, 6)
    0.816497
    """
    if len(series) < 2:
        raise DataError(f"Normalisation impossible : {series.id!r} contient moins de 2 points.")
    x = series.values
    mu = float(np.mean(x))
    sigma = float(np.std(x))
    if sigma == 0.0:
        raise DataError(f"Normalisation impossible : la série {series.id!r} est constante.")
    params = NormalizationParams(mu, sigma)
    return series.with_values(params.apply(x)), params


def denormalize(series: Series, params: NormalizationParams) -> Series:
    """Inverse of :func:`normalize`: ``x = x' * sigma + mu``."""
    return series.with_values(params.invert(series.values))


def describe(series: Series) -> SeriesStats:
    """
    Descriptive statistics of a series.

    Parameters
    ----------
    series : Series

    Returns
    -------
    SeriesStats
        Quantiles by linear interpolation, population standard deviation.

    Examples
    --------
    >>> describe(Series.from_arrays("k", [0, 60, 120, 180], [1, 2, 3, 4])).q50
    2.5
    """
    if len(series) == 0:
        raise DataError("describe() sur une série vide.")
    s = pd.Series(series.values)
    q25, q50, q75 = s.quantile([0.25, 0.5, 0.75], interpolation="linear").tolist()
    return SeriesStats(
        count=int(s.size),
        mean=float(s.mean()),
        std=float(s.std(ddof=0)),
        min=float(s.min()),
        q25=float(q25),
        q50=float(q50),
        q75=float(q75),
        max=float(s.max()),
    )
