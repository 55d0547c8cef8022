"""
Module principal du package kpiensemble.

Détection d'anomalies sur des séries de KPI par un ensemble de trois
prévisionnistes à un pas (ARIMA, STL, LS-TSVR), un détecteur peaks-over-threshold
par learner et un vote.

Fonctionnalités principales
--------------------------
- Modèle de série temporelle, ingestion CSV et données synthétiques (``data``)
- Learners ARIMA, STL et LS-TSVR (``models``)
- Loi de Pareto généralisée et détecteur POT (``evt``)
- Pipeline batch et flux avec checkpoints (``ensemble``)
- F1 fenêtré, métriques de prévision et entropie de permutation
  (``evaluation``, ``analyzer``)

Exemple
-------
>>> from kpiensemble import EnsembleConfig, fit, generate_synthetic
>>> series = generate_synthetic(8, 1440, 0.1, seed=0)
>>> pipeline = fit(series.slice(0, 8640), EnsembleConfig())
>>> detections = pipeline.detect_batch(series.slice(8640))
"""

__version__ = "0.1.0"

from .config import EnsembleConfig, RunConfig
from .data import Series, TimePoint, generate_synthetic, load_csv
from .ensemble import Detection, EnsemblePipeline, checkpoint, detect_batch, fit, restore, stream_push
from .evaluation import Evaluator, forecast_metrics, windowed_prf
from .exceptions import (
    CheckpointError,
    ComputationError,
    ConfigError,
    DataError,
    KpiEnsembleError,
    OutOfOrderError,
)

__all__ = [
    "__version__",
    "EnsembleConfig",
    "RunConfig",
    "Series",
    "TimePoint",
    "generate_synthetic",
    "load_csv",
    "Detection",
    "EnsemblePipeline",
    "fit",
    "detect_batch",
    "stream_push",
    "checkpoint",
    "restore",
    "Evaluator",
    "forecast_metrics",
    "windowed_prf",
    "KpiEnsembleError",
    "ConfigError",
    "DataError",
    "OutOfOrderError",
    "CheckpointError",
    "ComputationError",
]
