"""
Peaks-over-threshold (POT) detector on a stream of forecast errors.

Mathematical context
--------------------
Two thresholds are kept: the peak threshold $t$ (an empirical
$\\theta$-quantile of the training errors) and the alert threshold $z$. Each
excess $e_k - t > 0$ feeds a GPD fit, from which

$$
z = t + \\frac{\\sigma}{k}\\left(1 - \\left(\\frac{r\\,n}{N_t}\\right)^{k}\\right),
\\qquad z = t - \\sigma \\ln\\frac{r\\,n}{N_t} \\quad (k \\to 0)
$$

where $r$ is the tail probability (risk), $n$ the number of observations and
$N_t$ the number of excesses. This $z$ solves
$(N_t/n)(1 - F(z - t)) = r$.

Per error $e_k$:

- $e_k > z$: anomaly, recorded, the tail fit is left untouched;
- $t < e_k \\le z$: candidate, the excess joins the peak set, the GPD is refitted
  and $z$ recomputed;
- otherwise normal.

Examples
--------
>>> state = pot_init(np.arange(1.0, 1001.0), q=0.99, theta=0.95)
>>> round(state.t, 2)
950.05
"""

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from ..exceptions import ComputationError, ConfigError, DataError
from .gpd import GpdParams, gpd_fit

logger = logging.getLogger(__name__)

__all__ = ["Verdict", "PotState", "pot_quantile", "pot_init", "pot_step"]

MIN_TRAIN_ERRORS = 30


class Verdict(str, Enum):
    """Outcome of one detector step."""
    ANOMALY = "anomaly"
    CANDIDATE = "candidate"
    NORMAL = "normal"


@dataclass
class PotState:
    """
    Live state of a POT detector.

    Attributes
    ----------
    t : float
        Peak threshold.
    z : float
        Alert threshold, ``z >= t``.
    q : float
        Quantile level of the alert threshold (risk ``1 - q``).
    theta_init : float
        Quantile level of the peak threshold.
    n : int
        Observations seen (training included).
    n_peaks : int
        Excesses admitted since initialization (``N_t``); the peak set only
        keeps the last ``capacity`` of them.
    peaks : collections.deque
        Excesses ``e - t`` used for the GPD fit, all positive.
    anomalies : collections.deque
        ``(index, error)`` pairs flagged as anomalies.
    gpd : GpdParams or None
        Current tail fit, ``None`` below ``min_peaks`` excesses.
    z_init : float
        Empirical ``q``-quantile of the training errors, used while the tail
        cannot be fitted.
    """
    t: float
    z: float
    q: float
    theta_init: float
    n: int
    n_peaks: int
    z_init: float
    min_peaks: int = 10
    capacity: int = 10_000
    estimator: str = "lme"
    sliding_t: bool = False
    gpd: Optional[GpdParams] = None
    peaks: deque = field(default_factory=deque)
    anomalies: deque = field(default_factory=deque)
    recent: deque = field(default_factory=deque)
    peak_sum: float = 0.0
    peak_sumsq: float = 0.0

    @property
    def risk(self) -> float:
        return 1.0 - self.q

    def add_peak(self, excess: float):
        if len(self.peaks) == self.peaks.maxlen:
            old = self.peaks[0]
            self.peak_sum -= old
            self.peak_sumsq -= old * old
        self.peaks.append(excess)
        self.peak_sum += excess
        self.peak_sumsq += excess * excess

    def set_peaks(self, values):
        self.peaks = deque(values, maxlen=self.capacity)
        arr = np.asarray(self.peaks, dtype=float)
        self.peak_sum = float(arr.sum())
        self.peak_sumsq = float((arr * arr).sum())

    def copy(self) -> "PotState":
        """Independent copy; the peak, anomaly and recent deques are not shared."""
        return replace(
            self, peaks=deque(self.peaks, maxlen=self.peaks.maxlen),
            anomalies=deque(self.anomalies, maxlen=self.anomalies.maxlen),
            recent=deque(self.recent, maxlen=self.recent.maxlen),
        )

    def to_dict(self) -> dict:
        return {
            "t": self.t, "z": self.z, "q": self.q, "theta_init": self.theta_init,
            "n": self.n, "n_peaks": self.n_peaks, "z_init": self.z_init,
            "min_peaks": self.min_peaks, "capacity": self.capacity,
            "estimator": self.estimator, "sliding_t": self.sliding_t,
            "gpd": None if self.gpd is None else self.gpd.to_dict(),
            "peaks": list(self.peaks),
            "anomalies": [[int(i), float(e)] for i, e in self.anomalies],
            "anomaly_capacity": self.anomalies.maxlen,
            "recent": list(self.recent),
            "recent_capacity": self.recent.maxlen,
            "peak_sum": self.peak_sum, "peak_sumsq": self.peak_sumsq,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PotState":
        state = cls(
            t=float(data["t"]), z=float(data["z"]), q=float(data["q"]),
            theta_init=float(data["theta_init"]), n=int(data["n"]),
            n_peaks=int(data["n_peaks"]), z_init=float(data["z_init"]),
            min_peaks=int(data["min_peaks"]), capacity=int(data["capacity"]),
            estimator=str(data["estimator"]), sliding_t=bool(data["sliding_t"]),
            gpd=None if data["gpd"] is None else GpdParams.from_dict(data["gpd"]),
            peaks=deque((float(v) for v in data["peaks"]), maxlen=int(data["capacity"])),
            anomalies=deque(((int(i), float(e)) for i, e in data["anomalies"]),
                            maxlen=data["anomaly_capacity"]),
            recent=deque((float(v) for v in data["recent"]), maxlen=data["recent_capacity"]),
            peak_sum=float(data["peak_sum"]), peak_sumsq=float(data["peak_sumsq"]),
        )
        return state


def pot_quantile(t: float, params: GpdParams, q: float, n: int, n_peaks: int) -> float:
    r"""
    Alert threshold with tail probability ``q`` above ``t``.

    Parameters
    ----------
    t : float
        Peak threshold.
    params : GpdParams
        Tail fit of the excesses.
    q : float
        Tail probability (risk) in ``(0, 1)``.
    n : int
        Number of observations.
    n_peaks : int
        Number of excesses ``N_t``, ``1 <= N_t <= n``.

    Returns
    -------
    float

    Raises
    ------
    ConfigError
        On an invalid probability or count.

    Examples
    --------
    >>> pot_quantile(0.0, GpdParams(1.0, 1.0), 0.1, 10, 10)
    0.9
    """
    if not 0.0 < q < 1.0:
        raise ConfigError(f"Probabilité invalide : {q}")
    if n_peaks < 1 or n_peaks > n:
        raise ConfigError(f"Nombre de pics invalide : N_t={n_peaks}, n={n}")
    ratio = q * n / n_peaks
    if abs(params.k) < 1e-8:
        return float(t - params.sigma * np.log(ratio))
    return float(t + params.sigma / params.k * (1.0 - ratio ** params.k))


def _fit(state: PotState) -> Optional[GpdParams]:
    if state.estimator == "moments":
        # O(1) from running sums
        m = len(state.peaks)
        mean = state.peak_sum / m
        var = (state.peak_sumsq - m * mean * mean) / (m - 1)
        if not var > 0:
            raise DataError("Échantillon dégénéré : variance nulle.")
        ratio = mean * mean / var
        return GpdParams(mean * (ratio + 1.0) / 2.0, (ratio - 1.0) / 2.0, "moments")
    return gpd_fit(np.asarray(state.peaks, dtype=float), state.estimator)


def _refresh_z(state: PotState):
    if len(state.peaks) < state.min_peaks:
        state.gpd = None
        state.z = max(state.z_init, state.t)
        return
    try:
        state.gpd = _fit(state)
    except (DataError, ConfigError) as exc:
        logger.debug("Réestimation GPD impossible (%s), seuil conservé", exc)
        return
    z = pot_quantile(state.t, state.gpd, state.risk, state.n, state.n_peaks)
    state.z = max(z, state.t) if np.isfinite(z) else state.z
    logger.debug("GPD sigma=%.4g k=%.4g -> z=%.4g", state.gpd.sigma, state.gpd.k, state.z)


def pot_init(train_errors, q: float = 0.99, theta: float = 0.95, min_peaks: int = 10,
             estimator: str = "lme", sliding_t: bool = False, capacity: int = 10_000,
             t_window: int = 10_000, anomaly_capacity: int = 10_000) -> PotState:
    """
    Calibrate a detector on training errors.

    Parameters
    ----------
    train_errors : array-like
        At least 30 finite errors (NaN entries are ignored).
    q : float, default=0.99
        Quantile level of the alert threshold.
    theta : float, default=0.95
        Quantile level of the peak threshold, ``theta < q``.
    min_peaks : int, default=10
        Excesses needed before the GPD replaces the empirical quantile.
    estimator : {"lme", "moments"}, default="lme"
    sliding_t : bool, default=False
        Slide ``t`` to the ``theta``-quantile of the last ``t_window`` errors.
    capacity : int, default=10000
        Size of the FIFO peak set.
    t_window, anomaly_capacity : int
        Sizes of the recent-error window and of the anomaly log.

    Returns
    -------
    PotState

    Raises
    ------
    ConfigError
        If ``theta >= q`` or a level is outside ``(0, 1)``.
    DataError
        If there are fewer than 30 finite errors.
    """
    if not (0.0 < theta < 1.0 and 0.0 < q < 1.0):
        raise ConfigError(f"q et theta doivent être dans (0, 1) (reçu q={q}, theta={theta}).")
    if theta >= q:
        raise ConfigError(f"theta ({theta}) doit être strictement inférieur à q ({q}).")
    if estimator not in ("lme", "moments"):
        raise ConfigError(f"Estimateur inconnu : {estimator}")
    if min_peaks < 2 or capacity < min_peaks:
        raise ConfigError(f"min_peaks={min_peaks} / capacity={capacity} invalides.")
    errors = np.asarray(train_errors, dtype=float).ravel()
    errors = errors[np.isfinite(errors)]
    if errors.size < MIN_TRAIN_ERRORS:
        raise DataError(f"Au moins {MIN_TRAIN_ERRORS} erreurs d'entraînement requises (reçu {errors.size}).")
    t = float(np.quantile(errors, theta))
    z_init = float(np.quantile(errors, q))
    excesses = errors[errors > t] - t
    state = PotState(
        t=t, z=z_init, q=q, theta_init=theta, n=int(errors.size), n_peaks=int(excesses.size),
        z_init=z_init, min_peaks=min_peaks, capacity=capacity, estimator=estimator,
        sliding_t=sliding_t, anomalies=deque(maxlen=anomaly_capacity),
        recent=deque(errors[-t_window:].tolist(), maxlen=t_window),
    )
    state.set_peaks(excesses.tolist())
    _refresh_z(state)
    logger.debug("POT initialisé : t=%.4g z=%.4g, %d pics", state.t, state.z, state.n_peaks)
    return state


def _slide_t(state: PotState):
    if len(state.recent) < MIN_TRAIN_ERRORS:
        return
    new_t = float(np.quantile(np.asarray(state.recent), state.theta_init))
    if new_t == state.t:
        return
    before = len(state.peaks)
    shifted = [p + state.t - new_t for p in state.peaks]
    state.set_peaks([p for p in shifted if p > 0])
    state.n_peaks = max(state.n_peaks - (before - len(state.peaks)), len(state.peaks))
    state.t = new_t
    _refresh_z(state)
    state.z = max(state.z, state.t)


def pot_step(state: PotState, e_k: float, index: int) -> Tuple[PotState, Verdict]:
    """
    Feed one error to the detector.

    Parameters
    ----------
    state : PotState
        Initialized detector, updated in place.
    e_k : float
        Finite error.
    index : int
        Position of the point, recorded for anomalies.

    Returns
    -------
    (PotState, Verdict)

    Raises
    ------
    ComputationError
        If the detector is not initialized.
    DataError
        If ``e_k`` is not finite.
    """
    if not isinstance(state, PotState):
        raise ComputationError("Détecteur POT non initialisé.")
    e_k = float(e_k)
    if not np.isfinite(e_k):
        raise DataError(f"Erreur non finie à l'indice {index}.")
    state.n += 1
    if e_k > state.z:
        state.anomalies.append((int(index), e_k))
        return state, Verdict.ANOMALY
    if state.sliding_t:
        state.recent.append(e_k)
    if e_k > state.t:
        state.add_peak(e_k - state.t)
        state.n_peaks += 1
        _refresh_z(state)
        verdict = Verdict.CANDIDATE
    else:
        verdict = Verdict.NORMAL
    if state.sliding_t:
        _slide_t(state)
    return state, verdict
