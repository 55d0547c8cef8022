"""
Multi-series runs and learner ablation for kpiensemble.

This module provides the :class:`Benchmark` class, which fits and runs one
ensemble pipeline per KPI series (optionally in parallel) with timings, and
:func:`ablation_scores`, which re-scores a detection run with each learner
removed or alone.

Mathematical Formulation
------------------------
For a run with learners $\\mathcal{L}$ and vote threshold $v$, the subset
$S \\subseteq \\mathcal{L}$ flags point $i$ when

.. math::
    \\#\\{l \\in S : \\mathrm{verdict}_l(i) = \\mathrm{anomaly}\\} \\ge \\min(v, |S|)

"Without $l$" uses $S = \\mathcal{L} \\setminus \\{l\\}$, "alone" uses
$S = \\{l\\}$ (threshold 1). Each subset is scored with the windowed F1 of
:mod:`kpiensemble.evaluation`.

The benchmark returns a dictionary:

.. code-block:: python

    {
        'kpi_id': {
            'detections': [...],
            'fit_time': ...,
            'detect_time': ...,
            'points_per_second': ...,
            'scores': {...} or None,
        },
        ...
    }

Examples
--------
>>> bench = Benchmark(EnsembleConfig())
>>> results = bench.run([(train, test)])
>>> bench.print_summary()
"""

import logging
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from .config import EnsembleConfig
from .data.series import Series
from .ensemble import Detection, EnsemblePipeline
from .evaluation import DEFAULT_T, windowed_prf
from .evt.pot import Verdict
from .exceptions import ConfigError

logger = logging.getLogger(__name__)

__all__ = ["flagged_indices", "subset_indices", "ablation_scores", "run_series", "Benchmark"]

ABLATION_MODES = ("without", "alone")


def flagged_indices(detections: Sequence[Detection]) -> np.ndarray:
    """Positions whose ensemble verdict is an anomaly."""
    return np.array([d.index for d in detections if d.ensemble_verdict], dtype=np.int64)


def subset_indices(detections: Sequence[Detection], learners: Sequence[str], threshold: int) -> np.ndarray:
    """Positions flagged by at least ``threshold`` of ``learners``."""
    if not learners:
        return np.empty(0, dtype=np.int64)
    out = []
    for d in detections:
        votes = sum(d.per_learner[name].verdict is Verdict.ANOMALY for name in learners)
        if votes >= threshold:
            out.append(d.index)
    return np.array(out, dtype=np.int64)


def ablation_scores(detections: Sequence[Detection], truth_indices, T: int = DEFAULT_T,
                    vote_threshold: Optional[int] = None, mode: str = "without") -> List[Dict]:
    """
    Windowed scores of the full ensemble and of each learner subset.

    Parameters
    ----------
    detections : sequence of Detection
        One run, positions aligned with ``truth_indices``.
    truth_indices : iterable of int
    T : int, default=7
    vote_threshold : int, optional
        Threshold of the full run, a strict majority when omitted.
    mode : {"without", "alone"}, default="without"
        Remove each learner in turn, or keep it alone.

    Returns
    -------
    list of dict
        ``1 + len(learners)`` rows: ``'ensemble'`` first, then
        ``'without_<learner>'`` or ``'<learner>_alone'``, each with the
        :class:`~kpiensemble.evaluation.EvalResult` fields.

    Raises
    ------
    ConfigError
        On an unknown mode.
    """
    if mode not in ABLATION_MODES:
        raise ConfigError(f"Mode d'ablation inconnu : {mode}. Disponibles : {list(ABLATION_MODES)}")
    learners = list(detections[0].per_learner) if detections else []
    if vote_threshold is None:
        vote_threshold = len(learners) // 2 + 1
    truth = list(truth_indices)
    rows = [{"name": "ensemble", **windowed_prf(flagged_indices(detections), truth, T).to_dict()}]
    for name in learners:
        if mode == "without":
            subset = [other for other in learners if other != name]
            label = f"without_{name}"
            threshold = min(vote_threshold, len(subset))
        else:
            subset, label, threshold = [name], f"{name}_alone", 1
        preds = subset_indices(detections, subset, threshold)
        rows.append({"name": label, **windowed_prf(preds, truth, T).to_dict()})
    return rows


def run_series(train: Series, test: Series, config: EnsembleConfig, T: int = DEFAULT_T) -> Tuple[str, Dict]:
    """
    Fit a pipeline on ``train`` and detect on ``test`` (one KPI, picklable for joblib).

    Returns
    -------
    tuple
        (kpi id, results dict)
    """
    # Mesure du temps d'entraînement
    start_fit = time.perf_counter()
    pipeline = EnsemblePipeline(config).fit(train)
    fit_time = time.perf_counter() - start_fit

    # Mesure du temps de détection
    start_detect = time.perf_counter()
    detections = pipeline.detect_batch(test)
    detect_time = time.perf_counter() - start_detect

    scores = None
    if test.labels is not None:
        scores = windowed_prf(flagged_indices(detections), test.anomaly_indices, T).to_dict()
    return train.id, {
        "detections": detections,
        "fit_time": fit_time,
        "detect_time": detect_time,
        "points_per_second": len(test) / detect_time if detect_time > 0 else float("inf"),
        "scores": scores,
    }


class Benchmark:
    r"""
    Run the ensemble on several KPI series, one independent pipeline each.

    Parameters
    ----------
    config : EnsembleConfig
        Shared by every series.
    T : int, default=7
        Matching window used when the test series are labelled.

    Attributes
    ----------
    results : dict or None
        Results after :meth:`run`.

    Methods
    -------
    run(pairs, n_jobs=1, show_progress=True)
        Fit and detect every (train, test) pair.
    summary()
        Return a formatted summary of the results.
    print_summary()
        Print the summary to stdout.
    """
    def __init__(self, config: Optional[EnsembleConfig] = None, T: int = DEFAULT_T):
        self.config = config or EnsembleConfig()
        self.T = T
        self.results = None

    def run(self, pairs: Sequence[Tuple[Series, Series]], n_jobs: int = 1,
            show_progress: bool = True) -> Dict[str, Dict]:
        """
        Fit and detect every ``(train, test)`` pair.

        Parameters
        ----------
        pairs : sequence of (Series, Series)
        n_jobs : int, default=1
            joblib workers; ``1`` runs sequentially in-process.
        show_progress : bool, default=True
            Show a progress bar on stderr.

        Returns
        -------
        dict
            {kpi_id: {detections, fit_time, detect_time, points_per_second, scores}},
            in input order.
        """
        pairs = list(pairs)
        iterator = tqdm(pairs, desc="Détection", unit="série", disable=not show_progress)
        if n_jobs == 1:
            outputs = [run_series(train, test, self.config, self.T) for train, test in iterator]
        else:
            logger.info("Exécution parallèle de %d séries (n_jobs=%d)", len(pairs), n_jobs)
            outputs = Parallel(n_jobs=n_jobs)(
                delayed(run_series)(train, test, self.config, self.T) for train, test in iterator
            )
        self.results = dict(outputs)
        return self.results

    def summary(self) -> Optional[str]:
        """
        Return a formatted summary of the results.

        Returns
        -------
        str or None
            Text summary, or None if no results.
        """
        if self.results is None:
            return None
        lines = ["=" * 60, "📊 RÉSUMÉ DE LA DÉTECTION", "=" * 60]
        for kpi, res in self.results.items():
            n_anomalies = int(sum(d.ensemble_verdict for d in res["detections"]))
            lines.append(f"\n🔹 {kpi}")
            lines.append("-" * 40)
            lines.append(f"  points: {len(res['detections'])}  anomalies: {n_anomalies}")
            if res["scores"] is not None:
                for metric in ("precision", "recall", "f1"):
                    lines.append(f"  {metric}: {res['scores'][metric]:.4f}")
            lines.append(f"  ⏱️ fit_time: {res['fit_time']:.4f}s")
            lines.append(f"  ⏱️ detect_time: {res['detect_time']:.4f}s")
            lines.append(f"  ⚡ points/s: {res['points_per_second']:.1f}")
        return "\n".join(lines)

    def print_summary(self):
        """
        Print the summary of the benchmark results.
        """
        summary = self.summary()
        if summary:
            print(summary)
        else:
            print("⚠️ Aucun résultat. Exécutez d'abord run().")
