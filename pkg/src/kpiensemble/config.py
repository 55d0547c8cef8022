"""
Configuration of kpiensemble runs.

The library is configured with frozen dataclasses (:class:`EnsembleConfig` and
its nested sections). The command line adds :class:`RunConfig`, read from a
key-value text file::

    # detection.conf
    learners = arima, stl, lstsvr
    vote_threshold = 2
    pot.q = 0.9999
    pot.theta = 0.98
    stl.period = 1440
    lstsvr.kernel = rbf
    train = data/train.csv
    seed = 7

Dotted keys address the nested sections (``pot``, ``arima``, ``stl``,
``lstsvr``, ``schema``). ``--set key=value`` options and dedicated flags
override the file.
"""

import configparser
import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple

from .data.loader import CsvSchema
from .exceptions import ConfigError

__all__ = [
    "PotConfig",
    "ArimaConfig",
    "StlConfig",
    "LsTsvrConfig",
    "EnsembleConfig",
    "RunConfig",
    "read_config_file",
    "load_run_config",
    "apply_overrides",
    "config_hash",
]

LEARNERS = ("arima", "stl", "lstsvr")
VOTE_MODES = ("majority", "error_average")
FORMATS = ("jsonl", "csv")


@dataclass(frozen=True)
class PotConfig:
    """Detector settings: quantile levels, tail estimator, peak-set sizes."""
    q: float = 0.99
    theta: float = 0.95
    min_peaks: int = 10
    sliding_t: bool = False
    estimator: str = "lme"
    capacity: int = 10_000
    t_window: int = 10_000

    def __post_init__(self):
        if not (0 < self.theta < self.q < 1):
            raise ConfigError(f"Il faut 0 < theta < q < 1 (reçu theta={self.theta}, q={self.q}).")
        if self.estimator not in ("lme", "moments"):
            raise ConfigError(f"Estimateur inconnu : {self.estimator}")
        if self.min_peaks < 2 or self.capacity < self.min_peaks or self.t_window < 1:
            raise ConfigError("min_peaks, capacity ou t_window invalide.")


@dataclass(frozen=True)
class ArimaConfig:
    """ARIMA orders."""
    p: int = 5
    d: int = 1
    q: int = 0

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ConfigError(f"Ordres ARIMA négatifs : ({self.p}, {self.d}, {self.q})")


@dataclass(frozen=True)
class StlConfig:
    """STL period, trend window and streaming refresh."""
    period: int = 1440
    trend_window: Optional[int] = None
    loess_span: Optional[int] = None
    extrapolation: str = "last"
    history_periods: int = 6
    refresh_every: Optional[int] = None

    def __post_init__(self):
        if self.period < 1:
            raise ConfigError(f"Période STL invalide : {self.period}")
        if self.trend_window is not None and self.trend_window < 2:
            raise ConfigError(f"Fenêtre de tendance invalide : {self.trend_window}")
        if self.extrapolation not in ("last", "slope"):
            raise ConfigError(f"Extrapolation inconnue : {self.extrapolation}")


@dataclass(frozen=True)
class LsTsvrConfig:
    """LS-TSVR kernel, tubes and sliding-window refit (the lag window is ``EnsembleConfig.window``)."""
    train_size: int = 1440
    kernel: str = "linear"
    gamma: Optional[float] = None
    eps1: float = 0.1
    eps2: float = 0.1
    c1: float = 1.0
    c2: float = 1.0
    refit_every: int = 1440

    def __post_init__(self):
        if self.kernel not in ("linear", "rbf"):
            raise ConfigError(f"Noyau inconnu : {self.kernel}")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError(f"gamma doit être > 0 (reçu {self.gamma}).")
        if self.eps1 < 0 or self.eps2 < 0 or not (self.c1 > 0 and self.c2 > 0):
            raise ConfigError("eps1/eps2 doivent être >= 0 et c1/c2 > 0.")
        if self.train_size < 2 or self.refit_every < 1:
            raise ConfigError("train_size doit être >= 2 et refit_every >= 1.")


@dataclass(frozen=True)
class EnsembleConfig:
    """
    Settings of the ensemble pipeline.

    Parameters
    ----------
    learners : tuple of str, default=("arima", "stl", "lstsvr")
        Enabled learners.
    vote_mode : {"majority", "error_average"}, default="majority"
        Per-learner detectors and a vote, or one detector on the mean error.
    vote_threshold : int, optional
        Anomaly votes needed; defaults to a strict majority (2 of 3).
    window : int, default=60
        LS-TSVR lag window and warm-up length.
    normalize_input : bool, default=True
        Zero-mean normalization with the training statistics.
    warmup : int, optional
        Stream points never flagged after ``fit``; defaults to ``window``.
    """
    learners: Tuple[str, ...] = LEARNERS
    vote_mode: str = "majority"
    vote_threshold: Optional[int] = None
    window: int = 60
    normalize_input: bool = True
    warmup: Optional[int] = None
    pot: PotConfig = field(default_factory=PotConfig)
    arima: ArimaConfig = field(default_factory=ArimaConfig)
    stl: StlConfig = field(default_factory=StlConfig)
    lstsvr: LsTsvrConfig = field(default_factory=LsTsvrConfig)

    def __post_init__(self):
        learners = tuple(self.learners)
        object.__setattr__(self, "learners", learners)
        if not learners:
            raise ConfigError("Au moins un learner doit être activé.")
        unknown = [name for name in learners if name not in LEARNERS]
        if unknown:
            raise ConfigError(f"Learner inconnu : {unknown}. Disponibles : {list(LEARNERS)}")
        if len(set(learners)) != len(learners):
            raise ConfigError(f"Learner dupliqué dans {list(learners)}")
        if self.vote_mode not in VOTE_MODES:
            raise ConfigError(f"Mode de vote inconnu : {self.vote_mode}")
        if not 1 <= self.votes_needed <= len(learners):
            raise ConfigError(
                f"vote_threshold doit être entre 1 et {len(learners)} (reçu {self.vote_threshold})."
            )
        if self.window < 1:
            raise ConfigError(f"window doit être >= 1 (reçu {self.window}).")
        if self.warmup is not None and self.warmup < 0:
            raise ConfigError(f"warmup doit être >= 0 (reçu {self.warmup}).")

    @property
    def votes_needed(self) -> int:
        """Resolved ``vote_threshold``: a strict majority when unset."""
        if self.vote_threshold is None:
            return len(self.learners) // 2 + 1
        return self.vote_threshold

    @property
    def warmup_points(self) -> int:
        """Resolved ``warmup``: ``window`` when unset."""
        return self.window if self.warmup is None else self.warmup

    @property
    def min_train_size(self) -> int:
        """Shortest training span: two periods when STL is on, ``window + 50`` otherwise."""
        size = self.window + 50
        if "stl" in self.learners:
            size = max(size, 2 * self.stl.period)
        return size

    def learner_params(self, name: str) -> Dict:
        """Keyword arguments of :func:`kpiensemble.models.get_learner` for ``name``."""
        if name == "arima":
            return dataclasses.asdict(self.arima)
        if name == "stl":
            return dataclasses.asdict(self.stl)
        if name == "lstsvr":
            return {"window": self.window, **dataclasses.asdict(self.lstsvr)}
        raise ConfigError(f"Learner inconnu : {name}")

    def to_dict(self) -> Dict:
        data = dataclasses.asdict(self)
        data["learners"] = list(self.learners)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "EnsembleConfig":
        data = dict(data)
        sections = {"pot": PotConfig, "arima": ArimaConfig, "stl": StlConfig, "lstsvr": LsTsvrConfig}
        try:
            for key, section in sections.items():
                if key in data:
                    data[key] = section(**data[key])
            if "learners" in data:
                data["learners"] = tuple(data["learners"])
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"Configuration invalide : {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a command-line run depends on.

    Parameters
    ----------
    ensemble : EnsembleConfig
    train, test, output : str, optional
        Input and output paths.
    seed : int, default=0
        Single source of randomness (synthetic data).
    format : {"jsonl", "csv"}, default="jsonl"
        Detection output format.
    T : int, default=7
        Matching window of the evaluation.
    schema : CsvSchema
        CSV column mapping.
    n_jobs : int, default=1
        Parallel series in ``detect`` / ``eval``.
    """
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    train: Optional[str] = None
    test: Optional[str] = None
    output: Optional[str] = None
    seed: int = 0
    format: str = "jsonl"
    T: int = 7
    schema: CsvSchema = field(default_factory=CsvSchema)
    n_jobs: int = 1

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigError(f"Format inconnu : {self.format}. Disponibles : {list(FORMATS)}")
        if self.T < 0:
            raise ConfigError(f"T doit être >= 0 (reçu {self.T}).")

    def to_dict(self) -> Dict:
        return {
            "ensemble": self.ensemble.to_dict(),
            "train": self.train, "test": self.test, "output": self.output,
            "seed": self.seed, "format": self.format, "T": self.T,
            "schema": dataclasses.asdict(self.schema), "n_jobs": self.n_jobs,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunConfig":
        data = dict(data)
        try:
            if "ensemble" in data:
                data["ensemble"] = EnsembleConfig.from_dict(data["ensemble"])
            if "schema" in data:
                data["schema"] = CsvSchema(**data["schema"])
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"Configuration invalide : {exc}") from exc


_SECTIONS = {"pot": PotConfig, "arima": ArimaConfig, "stl": StlConfig, "lstsvr": LsTsvrConfig}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key: str, text: str, hint):
    text = text.strip()
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if text.lower() in ("", "none", "null"):
            return None
        hint = args[0]
        origin = typing.get_origin(hint)
    try:
        if hint is bool:
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        if origin in (tuple, typing.Tuple):
            return tuple(part.strip() for part in text.split(",") if part.strip())
        return text
    except ValueError:
        raise ConfigError(f"Valeur invalide pour {key} : {text!r}") from None


def _target(data: Dict, key: str):
    """Dict to update, field name and type hints for an override key."""
    head, _, rest = key.partition(".")
    if rest and head in _SECTIONS:
        return data["ensemble"][head], rest, typing.get_type_hints(_SECTIONS[head])
    if rest and head == "schema":
        return data["schema"], rest, typing.get_type_hints(CsvSchema)
    if not rest and key not in ("ensemble", "schema"):
        run_hints = typing.get_type_hints(RunConfig)
        if key in run_hints:
            return data, key, run_hints
        ens_hints = typing.get_type_hints(EnsembleConfig)
        if key in ens_hints and key not in _SECTIONS:
            return data["ensemble"], key, ens_hints
    raise ConfigError(f"Clé de configuration inconnue : {key}")


def apply_overrides(run: RunConfig, values: Mapping[str, str]) -> RunConfig:
    """
    Apply ``key = value`` strings to a run configuration.

    All keys are applied before validation, so their order does not matter.

    Raises
    ------
    ConfigError
        On an unknown key, a value of the wrong type or an invalid result.
    """
    data = run.to_dict()
    for key, text in values.items():
        target, name, hints = _target(data, key)
        target[name] = _coerce(key, text, hints[name])
    return RunConfig.from_dict(data)


def read_config_file(path) -> Dict[str, str]:
    """
    Read ``key = value`` lines (``#`` comments) into a dict of strings.

    Raises
    ------
    OSError
        If the file cannot be read.
    ConfigError
        If the file is not a valid key-value document.
    """
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"Fichier de configuration invalide {path} : {exc}") from exc
    return dict(parser["run"])


def load_run_config(path=None, overrides: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Defaults, then the file at ``path`` (if any), then ``overrides``."""
    run = RunConfig()
    if path is not None:
        run = apply_overrides(run, read_config_file(path))
    if overrides:
        run = apply_overrides(run, overrides)
    return run


def config_hash(run: RunConfig) -> str:
    """SHA-256 of the canonical JSON form of a run configuration."""
    canonical = json.dumps(run.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
