"""
Command-line interface (CLI) for kpiensemble.

Subcommands
-----------
- ``detect``  : fit on a training CSV, score a test CSV, write the detections
- ``stream``  : fit (or resume a checkpoint) then score JSON lines read on stdin
- ``eval``    : windowed precision / recall / F1 of a detections file, with
  optional learner ablation
- ``synth``   : write a labelled synthetic sine series
- ``entropy`` : permutation-entropy overlay of a CSV

Every command reads the same ``key = value`` configuration file
(``--config``), overridden by ``--set key=value`` and by the dedicated flags.

Examples (to run in terminal)
-----------------------------
Générer le jeu synthétique puis détecter sur les deux derniers jours :
    kpiensemble synth -o synth.csv --seed 7
    kpiensemble detect --config detection.conf --train train.csv --test test.csv -o detections.jsonl

Évaluer avec ablation :
    kpiensemble eval detections.jsonl --labels test.csv -T 7 --ablation

Flux continu avec checkpoint :
    tail -f points.jsonl | kpiensemble stream --config detection.conf --checkpoint-out state.json

Notes
-----
- stdout ne porte que les données (détections, rapports) ; les messages vont sur stderr.
- Codes de sortie : 0 succès, 2 configuration, 3 entrées/sorties, 4 données, 5 calcul.
"""

import argparse
import json
import logging
import os
import signal
import sys
import threading
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .analyzer import entropy_overlay, permutation_entropy
from .benchmark import Benchmark, ablation_scores, flagged_indices
from .config import RunConfig, config_hash, load_run_config
from .data import DataLoader, Series, TimePoint, generate_synthetic, make_anomaly_spec
from .ensemble import Detection, EnsemblePipeline
from .evaluation import windowed_prf
from .exceptions import ComputationError, ConfigError, DataError, KpiEnsembleError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_COMPUTATION = 5


def _versions() -> Dict[str, str]:
    import scipy
    import sklearn
    import statsmodels
    return {
        "kpiensemble": __version__,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "statsmodels": statsmodels.__version__,
    }


def _run_metadata(run: RunConfig) -> Dict:
    """Header of every detections file; no wall-clock value, so reruns are byte-identical."""
    return {
        "tool": "kpiensemble",
        "config_hash": config_hash(run),
        "seed": run.seed,
        "learners": list(run.ensemble.learners),
        "vote_mode": run.ensemble.vote_mode,
        "vote_threshold": run.ensemble.votes_needed,
        "versions": _versions(),
    }


def _emit(message: str):
    """Human-readable progress line, kept off stdout."""
    print(message, file=sys.stderr)


@contextmanager
def _open_output(path: Optional[str]):
    if path in (None, "-"):
        yield sys.stdout
        return
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as handle:
        yield handle


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, allow_nan=False)


# --- Configuration -----------------------------------------------------------

def _run_config(args) -> RunConfig:
    """Defaults, then the config file, then ``--set``, then the dedicated flags."""
    overrides = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Option --set invalide : {item!r} (attendu clé=valeur).")
        overrides[key.strip()] = value.strip()
    for key in ("train", "test", "output", "seed", "format", "T", "n_jobs"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = str(value)
    return load_run_config(args.config, overrides)


def _select_pairs(train: List[Series], test: List[Series]):
    by_id = {s.id: s for s in train}
    if len(train) == 1 and len(test) == 1:
        return [(train[0], test[0])]
    missing = [s.id for s in test if s.id not in by_id]
    if missing:
        raise DataError(f"KPI sans données d'entraînement : {missing}")
    return [(by_id[s.id], s) for s in test]


# --- detect ------------------------------------------------------------------

def write_detections(detections: Sequence[Detection], handle: TextIO, fmt: str, meta: Dict):
    """Write detections as JSON lines (meta object first) or CSV (``#`` header lines)."""
    if fmt == "jsonl":
        handle.write(_dumps({"meta": meta}) + "\n")
        for det in detections:
            handle.write(_dumps(det.to_dict()) + "\n")
        return
    for key, value in meta.items():
        text = json.dumps(value, sort_keys=True) if isinstance(value, (dict, list)) else value
        handle.write(f"# {key}: {text}\n")
    pd.DataFrame([det.to_row() for det in detections]).to_csv(
        handle, index=False, float_format="%.17g", lineterminator="\n"
    )


def read_detections(path) -> Tuple[Dict, List[Detection]]:
    """
    Read a detections file written by ``detect`` or ``stream``.

    Returns
    -------
    (dict, list of Detection)
        Metadata (empty when absent) and detections in file order.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Fichier introuvable : {path}")
    with path.open(encoding="utf-8") as handle:
        first = handle.readline()
    meta = {}
    detections = []
    if first.lstrip().startswith("{"):
        with path.open(encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}, ligne {lineno} : JSON invalide ({exc.msg}).") from exc
                if "meta" in obj:
                    meta = obj["meta"]
                else:
                    detections.append(Detection.from_dict(obj))
        return meta, detections
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            value = value.strip()
            try:
                meta[key.strip()] = json.loads(value)
            except json.JSONDecodeError:
                meta[key.strip()] = value
    frame = pd.read_csv(path, comment="#", dtype={"kpi_id": str})
    detections = [Detection.from_row(row) for row in frame.to_dict("records")]
    return meta, detections


def cmd_detect(args) -> int:
    run = _run_config(args)
    if run.train is None or run.test is None:
        raise ConfigError("detect : --train et --test (ou train/test dans la configuration) sont requis.")
    loader = DataLoader(run.schema)
    _emit(f"Chargement de {run.train} et {run.test} ...")
    pairs = _select_pairs(loader.load_csv(run.train), loader.load_csv(run.test))
    bench = Benchmark(run.ensemble, T=run.T)
    results = bench.run(pairs, n_jobs=run.n_jobs, show_progress=not args.quiet)
    detections = [det for res in results.values() for det in res["detections"]]
    with _open_output(run.output) as handle:
        write_detections(detections, handle, run.format, _run_metadata(run))
    n_flagged = sum(d.ensemble_verdict for d in detections)
    _emit(f"✅ {len(detections)} points analysés, {n_flagged} anomalies -> {run.output or 'stdout'}")
    if not args.quiet:
        _emit(bench.summary())
    return EXIT_OK


# --- stream ------------------------------------------------------------------

class _StopStream(Exception):
    pass


class _SignalCheckpointer:
    """
    Checkpoint requests coming from signals.

    SIGUSR1 asks for a checkpoint and continues; SIGTERM / SIGINT ask for a
    checkpoint and stop. The checkpoint itself is written by the main loop
    between two points, never in the middle of a push.
    """
    def __init__(self):
        self.pending = False
        self.stop = False
        self.busy = False
        self._previous = {}

    def _handle(self, signum, frame):
        self.pending = True
        if signum != getattr(signal, "SIGUSR1", None):
            self.stop = True
            if not self.busy:
                raise _StopStream()

    def install(self):
        if threading.current_thread() is not threading.main_thread():
            return
        for name in ("SIGTERM", "SIGINT", "SIGUSR1"):
            signum = getattr(signal, name, None)
            if signum is not None:
                self._previous[signum] = signal.signal(signum, self._handle)

    def uninstall(self):
        for signum, handler in self._previous.items():
            signal.signal(signum, handler)
        self._previous = {}


def _write_checkpoint(pipeline: EnsemblePipeline, path: Path):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(pipeline.to_json(), encoding="utf-8")
    os.replace(tmp, path)
    logger.info("Checkpoint écrit : %s (index %d)", path, pipeline.index)


def _parse_stream_line(line: str) -> TimePoint:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("objet JSON attendu")
    ts = obj["timestamp"]
    if isinstance(ts, bool):
        raise ValueError("horodatage invalide")
    if isinstance(ts, str):
        ts = float(ts)
    if float(ts) != int(ts):
        raise ValueError("horodatage non entier")
    value = obj["value"]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError("valeur numérique attendue")
    return TimePoint(int(ts), float(value))


def _stream_pipeline(run: RunConfig, args) -> EnsemblePipeline:
    if args.resume:
        path = Path(args.resume)
        if not path.is_file():
            raise FileNotFoundError(f"Checkpoint introuvable : {path}")
        pipeline = EnsemblePipeline.restore(path.read_text(encoding="utf-8"))
        _emit(f"Reprise depuis {path} (index {pipeline.index})")
        return pipeline
    if run.train is None:
        raise ConfigError("stream : --train (ou train dans la configuration) ou --resume est requis.")
    series = DataLoader(run.schema).load_csv(run.train)
    if args.kpi_id is not None:
        series = [s for s in series if s.id == args.kpi_id]
        if not series:
            raise DataError(f"KPI {args.kpi_id!r} absent de {run.train}")
    if len(series) != 1:
        raise ConfigError(f"{run.train} contient {len(series)} KPI : préciser --kpi-id.")
    return EnsemblePipeline(run.ensemble).fit(series[0])


def _iter_lines(source: Optional[str]) -> Iterable[str]:
    if source in (None, "-"):
        yield from sys.stdin
        return
    path = Path(source)
    if not path.is_file():
        raise FileNotFoundError(f"Fichier introuvable : {path}")
    with path.open(encoding="utf-8") as handle:
        yield from handle


def cmd_stream(args) -> int:
    run = _run_config(args)
    pipeline = _stream_pipeline(run, args)
    checkpoint_out = Path(args.checkpoint_out) if args.checkpoint_out else None
    out = sys.stdout
    signals = _SignalCheckpointer()
    if checkpoint_out is not None:
        signals.install()
    n_points = n_skipped = n_rejected = 0
    start = time.perf_counter()
    try:
        for lineno, line in enumerate(_iter_lines(args.input), start=1):
            if not line.strip():
                continue
            try:
                point = _parse_stream_line(line)
            except (ValueError, KeyError, TypeError, OverflowError) as exc:
                n_skipped += 1
                logger.warning("Ligne %d ignorée (mal formée) : %s", lineno, exc)
                continue
            signals.busy = True
            try:
                detection = pipeline.stream_push(point)
            except DataError as exc:
                n_rejected += 1
                logger.warning("Ligne %d rejetée : %s", lineno, exc)
                continue
            finally:
                signals.busy = False
            out.write(_dumps(detection.to_dict()) + "\n")
            out.flush()
            n_points += 1
            if checkpoint_out is not None:
                every = args.checkpoint_every
                if signals.pending or (every and n_points % every == 0):
                    _write_checkpoint(pipeline, checkpoint_out)
                    signals.pending = False
            if signals.stop:
                break
    except _StopStream:
        pass
    finally:
        signals.uninstall()
    if checkpoint_out is not None:
        _write_checkpoint(pipeline, checkpoint_out)
    elapsed = time.perf_counter() - start
    rate = n_points / elapsed if elapsed > 0 else float("inf")
    _emit(
        f"⚡ {n_points} points en {elapsed:.3f}s ({rate:.1f} pts/s), "
        f"{n_skipped} lignes ignorées, {n_rejected} rejetées"
    )
    return EXIT_OK


# --- eval --------------------------------------------------------------------

def _truth_indices(detections: List[Detection], series: Series) -> List[int]:
    labels = series.labels
    if labels is None:
        raise DataError(f"La série {series.id!r} ne porte pas de colonne label.")
    position = {int(t): i for i, t in enumerate(series.timestamps)}
    truth = []
    for det in detections:
        i = position.get(det.timestamp)
        if i is None:
            raise DataError(
                f"Fichiers non alignés : horodatage {det.timestamp} absent des labels de {series.id!r}."
            )
        if labels[i]:
            truth.append(det.index)
    return truth


def cmd_eval(args) -> int:
    run = _run_config(args)
    meta, detections = read_detections(args.detections)
    labelled = DataLoader(run.schema).load_csv(args.labels)
    groups: Dict[str, List[Detection]] = {}
    for det in detections:
        groups.setdefault(det.kpi_id, []).append(det)
    by_id = {s.id: s for s in labelled}
    vote_threshold = meta.get("vote_threshold", run.ensemble.votes_needed)

    report = {"T": run.T, "one_to_one": not args.many_to_one, "results": []}
    if args.ablation:
        report["ablation"] = []
    for kpi, dets in groups.items():
        series = by_id.get(kpi)
        if series is None and len(groups) == 1 and len(labelled) == 1:
            series = labelled[0]
        if series is None:
            raise DataError(f"Fichiers non alignés : KPI {kpi!r} absent de {args.labels}")
        truth = _truth_indices(dets, series)
        scores = windowed_prf(flagged_indices(dets), truth, run.T, one_to_one=not args.many_to_one)
        report["results"].append({"kpi_id": kpi, **scores.to_dict()})
        if args.ablation:
            rows = ablation_scores(dets, truth, run.T, vote_threshold, mode=args.ablation_mode)
            report["ablation"].extend({"kpi_id": kpi, **row} for row in rows)
        _emit(f"📊 {kpi} : precision={scores.precision:.4f} recall={scores.recall:.4f} f1={scores.f1:.4f}")
    with _open_output(args.output) as handle:
        handle.write(json.dumps(report, indent=2, ensure_ascii=False) + "\n")
    return EXIT_OK


# --- synth / entropy ---------------------------------------------------------

def cmd_synth(args) -> int:
    run = _run_config(args)
    n_points = args.periods * args.period_len
    spec = make_anomaly_spec(n_points, count=args.anomalies, magnitude=args.magnitude,
                             seed=run.seed, start=args.anomaly_start)
    series = generate_synthetic(args.periods, args.period_len, args.noise, spec, seed=run.seed,
                                id=args.id, interval=args.interval, start=args.start)
    path = DataLoader(run.schema).write_csv([series], args.output)
    _emit(f"✅ {len(series)} points ({len(spec)} anomalies) -> {path}")
    return EXIT_OK


def cmd_entropy(args) -> int:
    run = _run_config(args)
    frames = []
    for series in DataLoader(run.schema).load_csv(args.input):
        profile = permutation_entropy(series.values, order=args.order, window=args.window)
        frame = entropy_overlay(series, profile)
        frame.insert(0, "kpi_id", series.id)
        frames.append(frame)
        _emit(f"📈 {series.id} : entropie moyenne {float(profile.values.mean()):.4f}")
    with _open_output(args.output) as handle:
        pd.concat(frames, ignore_index=True).to_csv(
            handle, index=False, float_format="%.17g", lineterminator="\n"
        )
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='Fichier de configuration clé = valeur')
    common.add_argument('--set', action='append', metavar='CLE=VALEUR',
                        help='Surcharge une clé de configuration (répétable)')
    common.add_argument('--seed', type=int, default=None, help='Graine unique de la run')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='Journalisation détaillée (DEBUG)')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='Seulement les avertissements et erreurs')

    parser = argparse.ArgumentParser(prog="kpiensemble",
                                     description="kpiensemble : détection d'anomalies sur KPI par ensemble")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="commande")

    p = sub.add_parser("detect", parents=[common], help="Détection batch sur un CSV de test")
    p.add_argument('--train', type=str, default=None, help='CSV d\'entraînement')
    p.add_argument('--test', type=str, default=None, help='CSV de test')
    p.add_argument('-o', '--output', type=str, default=None, help='Fichier de détections (stdout par défaut)')
    p.add_argument('--format', type=str, choices=("jsonl", "csv"), default=None, help='Format de sortie')
    p.add_argument('--n-jobs', dest="n_jobs", type=int, default=None, help='Séries traitées en parallèle')
    p.set_defaults(handler=cmd_detect)

    p = sub.add_parser("stream", parents=[common], help="Détection en flux (JSON lines sur stdin)")
    p.add_argument('--train', type=str, default=None, help='CSV d\'entraînement')
    p.add_argument('--kpi-id', dest="kpi_id", type=str, default=None, help='KPI à suivre si le CSV en contient plusieurs')
    p.add_argument('--input', type=str, default=None, help='Fichier JSON lines (stdin par défaut)')
    p.add_argument('--resume', type=str, default=None, help='Reprendre depuis un checkpoint')
    p.add_argument('--checkpoint-out', dest="checkpoint_out", type=str, default=None,
                   help='Checkpoint écrit sur SIGTERM/SIGINT/SIGUSR1 et en fin de flux')
    p.add_argument('--checkpoint-every', dest="checkpoint_every", type=int, default=0,
                   help='Écrire aussi le checkpoint tous les N points')
    p.set_defaults(handler=cmd_stream)

    p = sub.add_parser("eval", parents=[common], help="Précision / rappel / F1 fenêtrés")
    p.add_argument('detections', type=str, help='Fichier de détections (jsonl ou csv)')
    p.add_argument('--labels', type=str, required=True, help='CSV labellisé')
    p.add_argument('-T', dest="T", type=int, default=None, help='Fenêtre de tolérance (défaut 7)')
    p.add_argument('--ablation', action='store_true', help='Ajoute une ligne par learner retiré')
    p.add_argument('--ablation-mode', dest="ablation_mode", choices=("without", "alone"),
                   default="without", help='Retirer chaque learner ou le garder seul')
    p.add_argument('--many-to-one', dest="many_to_one", action='store_true',
                   help='Une anomalie réelle peut valider plusieurs prédictions')
    p.add_argument('-o', '--output', type=str, default=None, help='Rapport JSON (stdout par défaut)')
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("synth", parents=[common], help="Génère une série synthétique labellisée")
    p.add_argument('-o', '--output', type=str, required=True, help='CSV de sortie')
    p.add_argument('--periods', type=int, default=8, help='Nombre de périodes')
    p.add_argument('--period-len', dest="period_len", type=int, default=1440, help='Points par période')
    p.add_argument('--noise', type=float, default=0.1, help='Écart-type du bruit')
    p.add_argument('--anomalies', type=int, default=20, help='Nombre de pics injectés')
    p.add_argument('--magnitude', type=float, default=1.0, help='Amplitude des pics')
    p.add_argument('--anomaly-start', dest="anomaly_start", type=int, default=0,
                   help='Premier indice éligible pour un pic')
    p.add_argument('--interval', type=int, default=60, help='Pas d\'échantillonnage (s)')
    p.add_argument('--start', type=int, default=0, help='Premier horodatage (s)')
    p.add_argument('--id', type=str, default="synthetic", help='Identifiant du KPI')
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("entropy", parents=[common], help="Entropie de permutation glissante")
    p.add_argument('input', type=str, help='CSV d\'entrée')
    p.add_argument('-w', '--window', type=int, default=60, help='Taille de fenêtre')
    p.add_argument('--order', type=int, default=3, help='Longueur des motifs ordinaux')
    p.add_argument('-o', '--output', type=str, default=None, help='CSV de sortie (stdout par défaut)')
    p.set_defaults(handler=cmd_entropy)
    return parser


def _setup_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s : %(message)s")
    logging.getLogger("kpiensemble").setLevel(level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point, returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "handler", None) is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    _setup_logging(args)
    try:
        return args.handler(args)
    except ConfigError as exc:
        _emit(f"❌ Configuration invalide : {exc}")
        return EXIT_CONFIG
    except DataError as exc:
        _emit(f"❌ Données invalides : {exc}")
        return EXIT_DATA
    except ComputationError as exc:
        _emit(f"❌ Échec du calcul : {exc}")
        return EXIT_COMPUTATION
    except OSError as exc:
        _emit(f"❌ Erreur d'entrée/sortie : {exc}")
        return EXIT_IO
    except KpiEnsembleError as exc:
        _emit(f"❌ Erreur : {exc}")
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
