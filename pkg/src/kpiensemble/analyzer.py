"""
Complexity analysis of KPI series.

This module provides the permutation entropy of a sliding window and the
plot-ready overlay table (timestamp, value, entropy) used to colour a series
by its local complexity, plus the :class:`SeriesAnalyzer` facade that also
exposes the descriptive statistics of a series.

Mathematical context
--------------------
For an order $d$, every run of $d$ consecutive samples is mapped to its ordinal
pattern $\\pi$ (the permutation sorting it, ties broken by position). With
$p(\\pi)$ the pattern frequencies inside a window:

$$
H = -\\frac{1}{\\ln d!} \\sum_\\pi p(\\pi) \\ln p(\\pi) \\in [0, 1]
$$

$H = 0$ for a monotone window (a single pattern), $H = 1$ when all $d!$
patterns are equally frequent. High entropy means a noisy, less predictable
segment.

Examples
--------
>>> profile = permutation_entropy(np.arange(100.0), order=3, window=60)
>>> float(profile.values.max())
0.0
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats

from .data.series import Series, describe
from .exceptions import ConfigError, DataError

logger = logging.getLogger(__name__)

__all__ = ["EntropyProfile", "permutation_entropy", "entropy_overlay", "SeriesAnalyzer"]

MIN_ORDER, MAX_ORDER = 2, 7


@dataclass(frozen=True, eq=False)
class EntropyProfile:
    """
    Normalized permutation entropies of consecutive windows.

    Attributes
    ----------
    window : int
    order : int
    values : numpy.ndarray
        ``values[i]`` is the entropy of ``x[i : i + window]``, i.e. aligned to
        the window end ``i + window - 1``.
    """
    window: int
    order: int
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    @property
    def end_indices(self) -> np.ndarray:
        return np.arange(self.window - 1, self.window - 1 + len(self.values))


def _pattern_codes(x: np.ndarray, order: int) -> np.ndarray:
    """Integer code of the ordinal pattern starting at each position."""
    ranks = np.argsort(sliding_window_view(x, order), axis=1, kind="stable")
    return ranks @ (order ** np.arange(order))


def permutation_entropy(x, order: int = 3, window: int = 60) -> EntropyProfile:
    """
    Sliding-window normalized permutation entropy.

    Parameters
    ----------
    x : array-like
        Values, at least ``window`` of them.
    order : int, default=3
        Pattern length, between 2 and 7.
    window : int, default=60
        Window length, at least ``order * order!``.

    Returns
    -------
    EntropyProfile
        ``len(x) - window + 1`` values in ``[0, 1]``.

    Raises
    ------
    ConfigError
        If the order is out of range or the window too short for it.
    DataError
        If ``x`` is shorter than the window or not finite.

    Examples
    --------
    >>> permutation_entropy(np.arange(20.0), order=3, window=18).values.tolist()
    [0.0, 0.0, 0.0]
    """
    if not isinstance(order, (int, np.integer)) or not MIN_ORDER <= order <= MAX_ORDER:
        raise ConfigError(f"L'ordre doit être un entier entre {MIN_ORDER} et {MAX_ORDER} (reçu {order}).")
    n_patterns = math.factorial(order)
    if window < order * n_patterns:
        raise ConfigError(
            f"Fenêtre {window} trop courte pour l'ordre {order} (minimum {order * n_patterns})."
        )
    x = np.asarray(x, dtype=float).ravel()
    if x.size < window:
        raise DataError(f"Série de {x.size} points plus courte que la fenêtre ({window}).")
    if not np.all(np.isfinite(x)):
        raise DataError("permutation_entropy : valeurs non finies.")

    _, ids = np.unique(_pattern_codes(x, order), return_inverse=True)
    per_window = window - order + 1
    counts = np.bincount(ids[:per_window], minlength=ids.max() + 1)
    norm = math.log(n_patterns)
    out = np.empty(x.size - window + 1)
    for i in range(out.size):
        if i:
            counts[ids[i - 1]] -= 1
            counts[ids[i + per_window - 1]] += 1
        h = stats.entropy(counts[counts > 0]) / norm
        out[i] = min(1.0, max(0.0, h))
    return EntropyProfile(window=int(window), order=int(order), values=out)


def entropy_overlay(series: Series, profile: EntropyProfile) -> pd.DataFrame:
    """
    Rows ``(timestamp, value, entropy)`` aligned on the window ends.

    Raises
    ------
    DataError
        If the profile was not computed on a series of this length.

    Examples
    --------
    >>> s = Series.from_arrays("k", np.arange(100) * 60, np.arange(100.0))
    >>> len(entropy_overlay(s, permutation_entropy(s.values, 3, 60)))
    41
    """
    expected = len(series) - profile.window + 1
    if len(profile) != expected:
        raise DataError(
            f"Profil d'entropie de {len(profile)} valeurs, {expected} attendues pour {series.id!r}."
        )
    ends = profile.end_indices
    return pd.DataFrame({
        "timestamp": series.timestamps[ends],
        "value": series.values[ends],
        "entropy": profile.values,
    })


class SeriesAnalyzer:
    r"""
    Exploratory analysis of one KPI series.

    Parameters
    ----------
    series : Series

    Examples
    --------
    >>> analyzer = SeriesAnalyzer(series)
    >>> analyzer.describe()
    >>> analyzer.chunk_entropy(4)
    """
    def __init__(self, series: Series):
        self.series = series

    def describe(self) -> pd.Series:
        """Count, mean, std and quartiles as a labelled table."""
        return describe(self.series).as_table()

    def entropy(self, order: int = 3, window: int = 60) -> EntropyProfile:
        return permutation_entropy(self.series.values, order, window)

    def overlay(self, order: int = 3, window: int = 60) -> pd.DataFrame:
        return entropy_overlay(self.series, self.entropy(order, window))

    def chunk_entropy(self, n_chunks: int, order: int = 3, window: int = 60) -> pd.Series:
        """
        Mean permutation entropy of ``n_chunks`` equal consecutive chunks.

        Raises
        ------
        ConfigError
            If a chunk is shorter than the window.
        """
        size = len(self.series) // max(int(n_chunks), 1)
        if n_chunks < 1 or size < window:
            raise ConfigError(f"{n_chunks} morceaux trop courts pour une fenêtre de {window}.")
        x = self.series.values
        means = [
            float(permutation_entropy(x[i * size:(i + 1) * size], order, window).values.mean())
            for i in range(n_chunks)
        ]
        return pd.Series(means, index=[f"chunk{i + 1}" for i in range(n_chunks)], name="entropy")
