"""
CSV ingestion of KPI series for kpiensemble.

This module provides the :class:`DataLoader` class and the :func:`load_csv` /
:func:`write_csv` helpers. A file holds one or more KPIs in long format, one row
per sample, with a header row and configurable column names.

Fonctionnalités principales
--------------------------
- Lecture d'un CSV local ou distant (URL http(s), mise en cache via pooch)
- Regroupement par identifiant de KPI, tri par horodatage
- Validation ligne à ligne (valeur non finie, horodatage illisible, doublon)
- Inférence de l'intervalle d'échantillonnage (écart modal)
- Écriture d'une liste de séries dans le même schéma

Exemple
-------
>>> series = load_csv("kpi.csv")
>>> [s.id for s in series]
['9ee5879409dccef9']
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
import pooch

from ..exceptions import DataError
from .series import Series, TimePoint, modal_interval

logger = logging.getLogger(__name__)

__all__ = ["CsvSchema", "DataLoader", "load_csv", "write_csv"]

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


@dataclass(frozen=True)
class CsvSchema:
    """
    Column mapping of a KPI CSV file.

    Parameters
    ----------
    timestamp, value : str
        Required columns. Timestamps are epoch seconds or any date string
        pandas can parse (read as UTC).
    label : str
        Optional 0/1 ground-truth column.
    kpi_id : str
        Optional KPI identifier column; when absent the whole file is one
        series named after the file.
    default_interval : int
        Interval used for a single-point series, which has no gap to infer from.
    """
    timestamp: str = "timestamp"
    value: str = "value"
    label: str = "label"
    kpi_id: str = "KPI ID"
    default_interval: int = 60


def _parse_timestamps(raw: pd.Series) -> pd.Series:
    ts = pd.to_numeric(raw, errors="coerce")
    missing = ts.isna() & raw.str.strip().ne("")
    if missing.any():
        dates = pd.to_datetime(raw[missing], errors="coerce", utc=True)
        ok = dates.notna()
        ts.loc[dates.index[ok]] = (dates[ok] - pd.Timestamp(0, tz="UTC")) // pd.Timedelta(seconds=1)
    return ts


def _parse_label(text: str):
    text = text.strip().lower()
    if text == "":
        return None
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    try:
        return float(text) != 0.0
    except ValueError:
        raise DataError(f"label illisible : {text!r}") from None


class DataLoader:
    r"""
    Loader of KPI CSV files.

    The loader isolates data access: the other modules only see
    :class:`~kpiensemble.data.series.Series` objects, never the file layout.

    Parameters
    ----------
    schema : CsvSchema, optional
        Column mapping (defaults to ``timestamp,value,label,KPI ID``).

    Examples
    --------
    >>> loader = DataLoader(CsvSchema(kpi_id="kpi"))
    >>> series = loader.load_csv("train.csv")
    >>> loader.write_csv(series, "copy.csv")
    """
    def __init__(self, schema: Optional[CsvSchema] = None):
        self.schema = schema or CsvSchema()

    def fetch(self, path) -> Path:
        """
        Resolve a local path or download an http(s) URL into the pooch cache.

        Raises
        ------
        FileNotFoundError
            If a local path does not exist.
        """
        text = str(path)
        if text.startswith(("http://", "https://")):
            logger.info("Téléchargement de %s", text)
            return Path(pooch.retrieve(url=text, known_hash=None, progressbar=False))
        local = Path(path)
        if not local.is_file():
            raise FileNotFoundError(f"Fichier introuvable : {local}")
        return local

    def load_csv(self, path) -> List[Series]:
        """
        Read a KPI CSV file into one series per KPI identifier.

        Parameters
        ----------
        path : str or pathlib.Path
            Local path or http(s) URL.

        Returns
        -------
        list of Series
            Sorted by KPI identifier; points sorted by timestamp.

        Raises
        ------
        OSError
            If the file cannot be read.
        DataError
            On a missing column, a malformed row (its line number is given),
            a duplicate timestamp or a non-finite value.
        """
        schema = self.schema
        local = self.fetch(path)
        df = pd.read_csv(local, dtype=str, keep_default_na=False, encoding="utf-8")
        for col in (schema.timestamp, schema.value):
            if col not in df.columns:
                raise DataError(f"Colonne {col!r} absente de {local}")
        # header is line 1
        lines = pd.Series(np.arange(len(df)) + 2, index=df.index)

        ts = _parse_timestamps(df[schema.timestamp])
        bad = ts.isna()
        if bad.any():
            raise DataError(f"{local}, ligne {lines[bad].iloc[0]} : horodatage illisible.")
        values = pd.to_numeric(df[schema.value], errors="coerce")
        bad = ~np.isfinite(values.to_numpy(dtype=float))
        if bad.any():
            i = df.index[bad][0]
            raise DataError(
                f"{local}, ligne {lines[i]} : valeur non finie ou mal formée {df.at[i, schema.value]!r}."
            )
        if schema.label in df.columns:
            labels = []
            for i, text in df[schema.label].items():
                try:
                    labels.append(_parse_label(text))
                except DataError as exc:
                    raise DataError(f"{local}, ligne {lines[i]} : {exc}") from None
        else:
            labels = [None] * len(df)
        if schema.kpi_id in df.columns:
            ids = df[schema.kpi_id].str.strip()
        else:
            ids = pd.Series(local.stem, index=df.index)

        table = pd.DataFrame({
            "id": ids, "timestamp": ts.astype(np.int64), "value": values.astype(float),
            "label": labels, "line": lines,
        })
        result = []
        for kpi, group in table.groupby("id", sort=True):
            group = group.sort_values(["timestamp", "line"], kind="mergesort")
            dup = group["timestamp"].duplicated(keep=False)
            if dup.any():
                where = ", ".join(str(n) for n in sorted(group.loc[dup, "line"])[:4])
                raise DataError(f"{local} : horodatage dupliqué pour le KPI {kpi!r} (lignes {where}).")
            stamps = group["timestamp"].tolist()
            interval = modal_interval(stamps) if len(stamps) > 1 else schema.default_interval
            points = tuple(
                TimePoint(int(t), float(v), l)
                for t, v, l in zip(stamps, group["value"], group["label"])
            )
            result.append(Series(str(kpi), points, interval))
        logger.info("%s : %d série(s), %d lignes", local, len(result), len(df))
        return result

    def write_csv(self, series: Sequence[Series], path) -> Path:
        """
        Write series in long format using the loader's schema.

        The label column is written (as 0/1) when any series carries labels.
        """
        schema = self.schema
        frames = []
        with_labels = any(s.labels is not None for s in series)
        for s in series:
            frame = pd.DataFrame({schema.timestamp: s.timestamps, schema.value: s.values})
            if with_labels:
                labels = s.labels
                frame[schema.label] = 0 if labels is None else labels.astype(int)
            frame[schema.kpi_id] = s.id
            frames.append(frame)
        out = Path(path)
        if out.parent and not out.parent.exists():
            out.parent.mkdir(parents=True, exist_ok=True)
        pd.concat(frames, ignore_index=True).to_csv(out, index=False, float_format="%.17g")
        return out


def load_csv(path, schema: Optional[CsvSchema] = None) -> List[Series]:
    """Shortcut for ``DataLoader(schema).load_csv(path)``."""
    return DataLoader(schema).load_csv(path)


def write_csv(series: Sequence[Series], path, schema: Optional[CsvSchema] = None) -> Path:
    """Shortcut for ``DataLoader(schema).write_csv(series, path)``."""
    return DataLoader(schema).write_csv(series, path)
