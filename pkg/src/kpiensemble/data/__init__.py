"""
Sous-package data : modèle de série temporelle, ingestion CSV et données synthétiques.
"""
from .series import (
    TimePoint,
    Series,
    NormalizationParams,
    SeriesStats,
    normalize,
    denormalize,
    describe,
    modal_interval,
)
from .loader import CsvSchema, DataLoader, load_csv, write_csv
from .synthetic import generate_synthetic, make_anomaly_spec

__all__ = [
    "TimePoint",
    "Series",
    "NormalizationParams",
    "SeriesStats",
    "normalize",
    "denormalize",
    "describe",
    "modal_interval",
    "CsvSchema",
    "DataLoader",
    "load_csv",
    "write_csv",
    "generate_synthetic",
    "make_anomaly_spec",
]
