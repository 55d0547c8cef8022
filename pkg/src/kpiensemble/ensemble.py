"""
The ensemble pipeline: normalization, one-step learners, per-learner POT
detectors and the vote.

Per test point every enabled learner forecasts the value from the observed
history, the absolute error ``e_k = |y_k - y_hat_k|`` is fed to that learner's
detector and the ensemble verdict is

- ``majority``: at least ``vote_threshold`` detectors say anomaly;
- ``error_average``: a single detector on the mean of the learner errors says
  anomaly.

The history always holds observed values, never predictions. Batch detection
runs the streaming step on a copy of the pipeline, so both modes give the same
output for any refit cadence.

Examples
--------
>>> from kpiensemble.data import generate_synthetic
>>> series = generate_synthetic(8, 1440, 0.1, seed=0)
>>> pipeline = fit(series.slice(0, 8640), EnsembleConfig())
>>> detections = pipeline.detect_batch(series.slice(8640))
>>> len(detections)
2880
"""

import copy
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .config import EnsembleConfig
from .data.series import NormalizationParams, Series, TimePoint
from .evt.pot import PotState, Verdict, pot_init, pot_step
from .exceptions import (
    CheckpointError,
    ComputationError,
    ConfigError,
    DataError,
    KpiEnsembleError,
    OutOfOrderError,
)
from .models import get_learner

logger = logging.getLogger(__name__)

__all__ = [
    "HistoryBuffer",
    "LearnerOutput",
    "Detection",
    "EnsemblePipeline",
    "fit",
    "detect_batch",
    "stream_push",
    "checkpoint",
    "restore",
]

SCHEMA_VERSION = 1
MEAN_DETECTOR = "mean"
# errors below this (normalized units) are round-off and count as exact forecasts
ERROR_FLOOR = 1e-8


class HistoryBuffer:
    """
    Last ``capacity`` observed values, oldest first.

    Backed by an array of twice the capacity that is compacted when full, so
    ``append`` is amortized O(1) and :meth:`view` never copies.

    Examples
    --------
    >>> h = HistoryBuffer(3, [1.0, 2.0, 3.0, 4.0])
    >>> h.view().tolist()
    [2.0, 3.0, 4.0]
    """

    def __init__(self, capacity: int, values=()):
        if capacity < 1:
            raise ConfigError(f"Capacité d'historique invalide : {capacity}")
        self.capacity = int(capacity)
        self._data = np.empty(2 * self.capacity)
        self._end = 0
        values = np.asarray(values, dtype=float)[-self.capacity:]
        self._data[:values.size] = values
        self._end = values.size

    def __len__(self):
        return min(self._end, self.capacity)

    def append(self, value: float):
        if self._end == self._data.size:
            keep = self.capacity - 1
            self._data[:keep] = self._data[self._end - keep:self._end]
            self._end = keep
        self._data[self._end] = value
        self._end += 1

    def view(self) -> np.ndarray:
        """Read-only view of the buffered values."""
        out = self._data[max(0, self._end - self.capacity):self._end]
        out.flags.writeable = False
        return out


@dataclass(frozen=True)
class LearnerOutput:
    """Forecast, absolute error, detector verdict and pre-step thresholds of one learner."""
    prediction: float
    error: float
    verdict: Verdict
    t: float
    z: float


@dataclass(frozen=True)
class Detection:
    """
    Outcome of the ensemble on one point.

    Attributes
    ----------
    index : int
        Position in the detection stream (0 for the first point after ``fit``).
    timestamp : int
    value : float
        Observed value.
    per_learner : dict of str to LearnerOutput
        Predictions, errors and thresholds in the units of ``value``.
    ensemble_verdict : bool
    warming : bool
        ``True`` during the warm-up, where nothing is flagged.
    kpi_id : str
    mean_error : float, optional
        Error fed to the shared detector in ``error_average`` mode.
    """
    index: int
    timestamp: int
    value: float
    per_learner: Dict[str, LearnerOutput]
    ensemble_verdict: bool
    warming: bool = False
    kpi_id: str = ""
    mean_error: Optional[float] = None

    @property
    def thresholds(self) -> Dict[str, Tuple[float, float]]:
        """``(t, z)`` of every learner's detector before the step."""
        return {name: (out.t, out.z) for name, out in self.per_learner.items()}

    @property
    def anomaly_votes(self) -> int:
        return sum(out.verdict is Verdict.ANOMALY for out in self.per_learner.values())

    def to_dict(self) -> dict:
        data = {
            "kpi_id": self.kpi_id,
            "index": self.index,
            "timestamp": self.timestamp,
            "value": self.value,
            "ensemble_verdict": self.ensemble_verdict,
            "warming": self.warming,
            "learners": {
                name: {
                    "prediction": out.prediction, "error": out.error,
                    "verdict": out.verdict.value, "t": out.t, "z": out.z,
                }
                for name, out in self.per_learner.items()
            },
        }
        if self.mean_error is not None:
            data["mean_error"] = self.mean_error
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Detection":
        try:
            per_learner = {
                name: LearnerOutput(
                    float(out["prediction"]), float(out["error"]), Verdict(out["verdict"]),
                    float(out["t"]), float(out["z"]),
                )
                for name, out in data["learners"].items()
            }
            mean_error = data.get("mean_error")
            return cls(
                index=int(data["index"]), timestamp=int(data["timestamp"]),
                value=float(data["value"]), per_learner=per_learner,
                ensemble_verdict=bool(data["ensemble_verdict"]),
                warming=bool(data.get("warming", False)), kpi_id=str(data.get("kpi_id", "")),
                mean_error=None if mean_error is None else float(mean_error),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise DataError(f"Détection invalide : {exc}") from exc

    def to_row(self) -> dict:
        """Flat record, one column per learner field (``<learner>_<field>``)."""
        row = {
            "kpi_id": self.kpi_id, "index": self.index, "timestamp": self.timestamp,
            "value": self.value, "ensemble_verdict": int(self.ensemble_verdict),
            "warming": int(self.warming),
        }
        for name, out in self.per_learner.items():
            row[f"{name}_prediction"] = out.prediction
            row[f"{name}_error"] = out.error
            row[f"{name}_verdict"] = out.verdict.value
            row[f"{name}_t"] = out.t
            row[f"{name}_z"] = out.z
        if self.mean_error is not None:
            row["mean_error"] = self.mean_error
        return row

    @classmethod
    def from_row(cls, row: dict) -> "Detection":
        """Inverse of :meth:`to_row`."""
        names = [key[:-len("_prediction")] for key in row if key.endswith("_prediction")]
        learners = {
            name: {field_: row[f"{name}_{field_}"] for field_ in ("prediction", "error", "verdict", "t", "z")}
            for name in names
        }
        mean_error = row.get("mean_error")
        if mean_error is not None and mean_error == mean_error:
            mean_error = float(mean_error)
        else:
            mean_error = None
        return cls.from_dict({
            "kpi_id": row.get("kpi_id", ""), "index": row["index"], "timestamp": row["timestamp"],
            "value": row["value"], "ensemble_verdict": int(row["ensemble_verdict"]) == 1,
            "warming": int(row.get("warming", 0)) == 1, "learners": learners,
            "mean_error": mean_error,
        })


def _floored(error: float) -> float:
    return 0.0 if error < ERROR_FLOOR else error


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"Type non sérialisable : {type(obj).__name__}")


@dataclass
class EnsemblePipeline:
    """
    Fitted learners, their detectors and the streaming state of one KPI.

    A pipeline is single-writer: one stream per instance. Use one pipeline per
    series to run several KPIs in parallel.

    Parameters
    ----------
    config : EnsembleConfig
    """
    config: EnsembleConfig = field(default_factory=EnsembleConfig)
    learners: Dict = field(default_factory=dict)
    detectors: Dict[str, PotState] = field(default_factory=dict)
    normalization: Optional[NormalizationParams] = None
    history: Optional[HistoryBuffer] = None
    kpi_id: str = ""
    interval: Optional[int] = None
    last_timestamp: Optional[int] = None
    index: int = 0

    @property
    def is_fitted(self) -> bool:
        return self.history is not None

    def _check_fitted(self):
        if not self.is_fitted:
            raise ComputationError("Le pipeline n'est pas entraîné : appeler fit() d'abord.")

    @property
    def _scale(self) -> float:
        return 1.0 if self.normalization is None else self.normalization.sigma

    def _to_model_units(self, value: float) -> float:
        if self.normalization is None:
            return float(value)
        return float((value - self.normalization.mu) / self.normalization.sigma)

    def _to_data_units(self, value: float) -> float:
        if self.normalization is None:
            return float(value)
        return float(value * self.normalization.sigma + self.normalization.mu)

    def fit(self, train: Series) -> "EnsemblePipeline":
        """
        Fit every enabled learner and calibrate the detectors on ``train``.

        Parameters
        ----------
        train : Series
            Training span, at least ``config.min_train_size`` points.

        Returns
        -------
        EnsemblePipeline
            ``self``.

        Raises
        ------
        DataError
            On insufficient training data (or a constant series when
            normalizing).
        ComputationError
            If a learner fails to fit; the message names the learner.
        """
        cfg = self.config
        learners = {name: get_learner(name, **cfg.learner_params(name)) for name in cfg.learners}
        needed = max([cfg.min_train_size] + [lrn.min_train_size for lrn in learners.values()])
        if len(train) < needed:
            raise DataError(
                f"Données d'entraînement insuffisantes pour {train.id!r} : "
                f"{len(train)} points, {needed} requis."
            )
        values = train.values
        if cfg.normalize_input:
            mu, sigma = float(np.mean(values)), float(np.std(values))
            if sigma == 0.0:
                raise DataError(f"Normalisation impossible : la série {train.id!r} est constante.")
            self.normalization = NormalizationParams(mu, sigma)
            values = self.normalization.apply(values)
        else:
            self.normalization = None

        errors = {}
        for name, learner in learners.items():
            start = time.perf_counter()
            try:
                learner.fit(values)
                fitted = learner.fitted_values(values)
            except KpiEnsembleError as exc:
                raise type(exc)(f"Learner {name} : {exc}") from exc
            except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
                raise ComputationError(f"Échec de l'entraînement du learner {name} : {exc}") from exc
            err = np.abs(values - fitted)
            errors[name] = np.where(err < ERROR_FLOOR, 0.0, err)
            logger.info("%s entraîné sur %d points en %.3fs", name, len(values), time.perf_counter() - start)

        pot = cfg.pot
        pot_kwargs = dict(
            q=pot.q, theta=pot.theta, min_peaks=pot.min_peaks, estimator=pot.estimator,
            sliding_t=pot.sliding_t, capacity=pot.capacity, t_window=pot.t_window,
        )
        if cfg.vote_mode == "error_average":
            sources = {MEAN_DETECTOR: np.mean(np.vstack(list(errors.values())), axis=0)}
        else:
            sources = errors
        detectors = {}
        for name, err in sources.items():
            try:
                detectors[name] = pot_init(err, **pot_kwargs)
            except DataError as exc:
                raise DataError(f"Détecteur {name} : {exc}") from exc

        capacity = max(max(lrn.history_size for lrn in learners.values()), cfg.window) + 1
        self.learners = learners
        self.detectors = detectors
        self.history = HistoryBuffer(capacity, values)
        self.kpi_id = train.id
        self.interval = train.interval
        self.last_timestamp = int(train.timestamps[-1])
        self.index = 0
        logger.info("Pipeline %r prêt : %s, vote %s", train.id, ", ".join(cfg.learners), cfg.vote_mode)
        return self

    def _validate_point(self, point: TimePoint):
        ts = int(point.timestamp)
        if self.last_timestamp is not None:
            if ts <= self.last_timestamp:
                raise OutOfOrderError(
                    f"Horodatage {ts} non postérieur au dernier point ({self.last_timestamp})."
                )
            if (ts - self.last_timestamp) % self.interval != 0:
                raise DataError(f"Horodatage {ts} hors de la grille de {self.interval}s.")
        if not np.isfinite(point.value):
            raise DataError(f"Valeur non finie à l'horodatage {ts}.")

    def stream_push(self, point: TimePoint) -> Detection:
        """
        Score one point and advance the streaming state.

        Parameters
        ----------
        point : TimePoint
            Next observation, strictly after the last timestamp and on the
            sampling grid (gaps allowed).

        Returns
        -------
        Detection

        Raises
        ------
        OutOfOrderError
            If the timestamp does not follow the last one; the state is left
            unchanged.
        DataError
            On an off-grid timestamp or a non-finite value.
        ComputationError
            If a detector step fails; no detector is advanced.
        """
        self._check_fitted()
        self._validate_point(point)
        cfg = self.config
        scale = self._scale
        x = self._to_model_units(point.value)
        history = self.history.view()
        warming = self.index < cfg.warmup_points

        predictions = {name: float(lrn.predict_next(history)) for name, lrn in self.learners.items()}
        errors = {name: _floored(abs(x - pred)) for name, pred in predictions.items()}

        outputs = {}
        mean_error = None
        # detectors step on copies, committed once every step succeeded
        staged = {}
        if cfg.vote_mode == "error_average":
            mean_err = float(np.mean(list(errors.values())))
            state = staged[MEAN_DETECTOR] = self.detectors[MEAN_DETECTOR].copy()
            t, z = state.t, state.z
            verdict = Verdict.NORMAL if warming else pot_step(state, mean_err, self.index)[1]
            for name in self.learners:
                outputs[name] = self._output(point.value, predictions[name], verdict, t, z)
            mean_error = mean_err * scale
            flagged = verdict is Verdict.ANOMALY
        else:
            for name in self.learners:
                state = staged[name] = self.detectors[name].copy()
                t, z = state.t, state.z
                verdict = Verdict.NORMAL if warming else pot_step(state, errors[name], self.index)[1]
                outputs[name] = self._output(point.value, predictions[name], verdict, t, z)
            votes = sum(out.verdict is Verdict.ANOMALY for out in outputs.values())
            flagged = votes >= cfg.votes_needed

        self.detectors.update(staged)
        self.history.append(x)
        history = self.history.view()
        for learner in self.learners.values():
            learner.observe(history)

        detection = Detection(
            index=self.index, timestamp=int(point.timestamp), value=float(point.value),
            per_learner=outputs, ensemble_verdict=flagged, warming=warming,
            kpi_id=self.kpi_id, mean_error=mean_error,
        )
        self.last_timestamp = int(point.timestamp)
        self.index += 1
        if flagged:
            logger.debug("Anomalie %r à l'indice %d (ts=%d)", self.kpi_id, detection.index, detection.timestamp)
        return detection

    def _output(self, value: float, prediction: float, verdict: Verdict, t: float, z: float) -> LearnerOutput:
        scale = self._scale
        pred = self._to_data_units(prediction)
        return LearnerOutput(
            prediction=pred, error=abs(float(value) - pred), verdict=verdict,
            t=t * scale, z=z * scale,
        )

    def detect_batch(self, test: Series) -> List[Detection]:
        """
        Score a whole test span.

        The pipeline itself is left untouched: the points are streamed through
        a deep copy.

        Raises
        ------
        DataError
            If the test interval differs from the training interval.
        """
        self._check_fitted()
        if test.interval != self.interval:
            raise DataError(
                f"Intervalle du test ({test.interval}s) différent de l'entraînement ({self.interval}s)."
            )
        runner = copy.deepcopy(self)
        return [runner.stream_push(point) for point in test]

    def checkpoint(self) -> dict:
        """JSON-compatible document of the full streaming state."""
        self._check_fitted()
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "kpi_id": self.kpi_id,
            "interval": self.interval,
            "last_timestamp": self.last_timestamp,
            "index": self.index,
            "normalization": None if self.normalization is None else {
                "mu": self.normalization.mu, "sigma": self.normalization.sigma,
            },
            "learners": {name: lrn.get_state() for name, lrn in self.learners.items()},
            "detectors": {name: state.to_dict() for name, state in self.detectors.items()},
            "history_capacity": self.history.capacity,
            "history": self.history.view().tolist(),
        }

    def to_json(self) -> str:
        """:meth:`checkpoint` serialized as strict JSON."""
        return json.dumps(self.checkpoint(), default=_json_default, allow_nan=False)

    @classmethod
    def restore(cls, document: Union[str, bytes, dict]) -> "EnsemblePipeline":
        """
        Rebuild a pipeline from :meth:`checkpoint` or :meth:`to_json` output.

        Raises
        ------
        CheckpointError
            On a schema version mismatch or a corrupt document.
        """
        if isinstance(document, (str, bytes)):
            try:
                document = json.loads(document)
            except json.JSONDecodeError as exc:
                raise CheckpointError(f"Checkpoint illisible : {exc}") from exc
        if not isinstance(document, dict):
            raise CheckpointError("Checkpoint corrompu : objet JSON attendu.")
        version = document.get("schema_version")
        if version != SCHEMA_VERSION:
            raise CheckpointError(
                f"Version de checkpoint {version!r} non supportée (attendu {SCHEMA_VERSION})."
            )
        try:
            config = EnsembleConfig.from_dict(document["config"])
            learners = {}
            for name in config.learners:
                learners[name] = get_learner(name, **config.learner_params(name)).set_state(
                    document["learners"][name]
                )
            norm = document["normalization"]
            pipeline = cls(
                config=config,
                learners=learners,
                detectors={name: PotState.from_dict(s) for name, s in document["detectors"].items()},
                normalization=None if norm is None else NormalizationParams(norm["mu"], norm["sigma"]),
                history=HistoryBuffer(int(document["history_capacity"]), document["history"]),
                kpi_id=str(document["kpi_id"]),
                interval=int(document["interval"]),
                last_timestamp=int(document["last_timestamp"]),
                index=int(document["index"]),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise CheckpointError(f"Checkpoint corrompu : {exc}") from exc
        expected = [MEAN_DETECTOR] if config.vote_mode == "error_average" else list(config.learners)
        if sorted(pipeline.detectors) != sorted(expected):
            raise CheckpointError("Checkpoint corrompu : détecteurs incohérents avec la configuration.")
        return pipeline


def fit(train: Series, config: Optional[EnsembleConfig] = None) -> EnsemblePipeline:
    """Build and fit a pipeline (see :meth:`EnsemblePipeline.fit`)."""
    return EnsemblePipeline(config or EnsembleConfig()).fit(train)


def detect_batch(pipeline: EnsemblePipeline, test: Series) -> List[Detection]:
    return pipeline.detect_batch(test)


def stream_push(pipeline: EnsemblePipeline, point: TimePoint) -> Detection:
    return pipeline.stream_push(point)


def checkpoint(pipeline: EnsemblePipeline) -> dict:
    return pipeline.checkpoint()


def restore(document) -> EnsemblePipeline:
    return EnsemblePipeline.restore(document)
