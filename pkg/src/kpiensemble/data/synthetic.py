"""
Synthetic seasonal KPI generator.

Builds the sine-wave benchmark series used to exercise the detectors: several
periods of a unit sine, Gaussian noise, and spikes injected at chosen
positions with matching ground-truth labels.

Mathematical context
--------------------
$y_t = \\sin(2\\pi t / L) + \\varepsilon_t + a_t$ with $\\varepsilon_t \\sim N(0, s^2)$,
$L$ the period length and $a_t$ the injected magnitude ($0$ off the spike
positions).

Examples
--------
>>> spec = make_anomaly_spec(11520, count=20, magnitude=1.0, seed=0)
>>> s = generate_synthetic(8, 1440, 0.1, spec, seed=0)
>>> len(s), int(s.labels.sum())
(11520, 20)
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ConfigError
from .series import Series, TimePoint

logger = logging.getLogger(__name__)

__all__ = ["generate_synthetic", "make_anomaly_spec"]

AnomalySpec = List[Tuple[int, float]]


def generate_synthetic(
    periods: int = 8,
    period_len: int = 1440,
    noise_sigma: float = 0.1,
    anomaly_spec: Optional[Sequence[Tuple[int, float]]] = None,
    seed: int = 0,
    id: str = "synthetic",
    interval: int = 60,
    start: int = 0,
) -> Series:
    r"""
    Generate a noisy sine series with labelled injected anomalies.

    Parameters
    ----------
    periods : int, default=8
        Number of full cycles (at least 1).
    period_len : int, default=1440
        Samples per cycle (at least 4); one day at one-minute sampling.
    noise_sigma : float, default=0.1
        Standard deviation of the additive Gaussian noise (0 gives a pure sine).
    anomaly_spec : sequence of (index, magnitude), optional
        Spikes added to the signal; the labels are true exactly there.
    seed : int, default=0
        Seed of ``numpy.random.default_rng``; equal seeds give identical series.
    id : str, default="synthetic"
        KPI identifier of the result.
    interval : int, default=60
        Sampling interval in seconds.
    start : int, default=0
        Timestamp of the first point.

    Returns
    -------
    Series

    Raises
    ------
    ConfigError
        On invalid sizes, a negative noise level, or an anomaly index out of
        range or listed twice.

    Examples
    --------
    >>> s = generate_synthetic(1, 8, 0.0)
    >>> float(s.values[2])
    1.0
    """
    if periods < 1:
        raise ConfigError(f"periods doit être >= 1 (reçu {periods}).")
    if period_len < 4:
        raise ConfigError(f"period_len doit être >= 4 (reçu {period_len}).")
    if noise_sigma < 0 or not np.isfinite(noise_sigma):
        raise ConfigError(f"noise_sigma invalide : {noise_sigma}")
    n = periods * period_len
    spec = list(anomaly_spec or [])
    seen = set()
    for index, magnitude in spec:
        if not 0 <= index < n:
            raise ConfigError(f"Indice d'anomalie hors limites : {index} (série de {n} points).")
        if index in seen:
            raise ConfigError(f"Indice d'anomalie dupliqué : {index}")
        if not np.isfinite(magnitude):
            raise ConfigError(f"Amplitude d'anomalie non finie à l'indice {index}.")
        seen.add(index)

    rng = np.random.default_rng(seed)
    t = np.arange(n)
    values = np.sin(2.0 * np.pi * t / period_len)
    if noise_sigma > 0:
        values = values + rng.normal(0.0, noise_sigma, size=n)
    labels = np.zeros(n, dtype=bool)
    for index, magnitude in spec:
        values[index] += magnitude
        labels[index] = True
    logger.debug("Série synthétique %s : %d points, %d anomalies", id, n, len(spec))
    points = tuple(
        TimePoint(start + i * interval, float(v), bool(l))
        for i, (v, l) in enumerate(zip(values, labels))
    )
    return Series(id, points, interval)


def make_anomaly_spec(
    n_points: int,
    count: int = 20,
    magnitude: float = 1.0,
    seed: int = 0,
    start: int = 0,
    min_gap: int = 15,
) -> AnomalySpec:
    """
    Spread ``count`` spikes over ``[start, n_points)``.

    The range is cut into ``count`` equal slots and one position is drawn in
    each, so two spikes are always at least ``min_gap`` points apart.

    Parameters
    ----------
    n_points : int
        Length of the target series.
    count : int, default=20
        Number of spikes.
    magnitude : float, default=1.0
        Amplitude added at every spike.
    seed : int, default=0
        Seed of ``numpy.random.default_rng``.
    start : int, default=0
        First eligible index (e.g. the start of the test span).
    min_gap : int, default=15
        Minimal distance between two spikes.

    Returns
    -------
    list of (int, float)
        Sorted ``(index, magnitude)`` pairs for :func:`generate_synthetic`.

    Raises
    ------
    ConfigError
        If the slots are too short for ``min_gap``.
    """
    if count < 0:
        raise ConfigError(f"count doit être positif (reçu {count}).")
    if count == 0:
        return []
    if not 0 <= start < n_points:
        raise ConfigError(f"start hors limites : {start}")
    slot = (n_points - start) // count
    if slot <= min_gap:
        raise ConfigError(
            f"Impossible de placer {count} anomalies espacées de {min_gap} sur {n_points - start} points."
        )
    rng = np.random.default_rng(seed)
    offsets = rng.integers(0, slot - min_gap + 1, size=count)
    return [(int(start + i * slot + o), float(magnitude)) for i, o in enumerate(offsets)]
