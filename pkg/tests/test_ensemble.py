"""
Test unitaire du pipeline d'ensemble : entraînement, vote, flux, checkpoints.
"""
import json
import unittest
from dataclasses import replace
from unittest import mock

import numpy as np

from kpiensemble.benchmark import ablation_scores
from kpiensemble.config import EnsembleConfig, LsTsvrConfig, PotConfig, StlConfig
from kpiensemble.data import TimePoint, generate_synthetic, make_anomaly_spec
from kpiensemble.ensemble import (
    MEAN_DETECTOR,
    Detection,
    EnsemblePipeline,
    HistoryBuffer,
    checkpoint,
    fit,
    restore,
)
from kpiensemble.evaluation import windowed_prf
from kpiensemble.evt.pot import Verdict, pot_step
from kpiensemble.exceptions import CheckpointError, ComputationError, DataError, OutOfOrderError
from kpiensemble.models import LEARNER_MAP, ArimaForecaster, LsTsvrForecaster, StlForecaster

# période de 100 points pour garder des tests rapides
SMALL = EnsembleConfig(
    window=10,
    pot=PotConfig(q=0.999, theta=0.95),
    stl=StlConfig(period=100),
    lstsvr=LsTsvrConfig(train_size=100, refit_every=100),
)


def small_series(periods=6, noise=0.1, seed=0, spikes=()):
    return generate_synthetic(periods, 100, noise, list(spikes), seed=seed)


def as_json(detections):
    return [json.dumps(d.to_dict(), sort_keys=True) for d in detections]


class TestHistoryBuffer(unittest.TestCase):
    def test_keeps_last_values(self):
        h = HistoryBuffer(3, [1.0, 2.0])
        for v in range(3, 10):
            h.append(float(v))
        self.assertEqual(h.view().tolist(), [7.0, 8.0, 9.0])
        self.assertEqual(len(h), 3)
        with self.assertRaises(ValueError):
            h.view()[0] = 0.0


class TestFit(unittest.TestCase):
    def setUp(self):
        self.series = small_series()

    def test_insufficient_training_data(self):
        with self.assertRaises(DataError) as ctx:
            fit(self.series.slice(0, 150), SMALL)
        self.assertIn("insuffisantes", str(ctx.exception))

    def test_constant_series(self):
        flat = self.series.with_values(np.full(len(self.series), 3.0))
        with self.assertRaises(DataError):
            fit(flat, SMALL)

    def test_push_before_fit(self):
        with self.assertRaises(ComputationError):
            EnsemblePipeline(SMALL).stream_push(TimePoint(0, 1.0))

    def test_fitted_state(self):
        pipeline = fit(self.series.slice(0, 300), SMALL)
        self.assertEqual(sorted(pipeline.detectors), ["arima", "lstsvr", "stl"])
        self.assertEqual(pipeline.interval, 60)
        self.assertEqual(pipeline.last_timestamp, 299 * 60)
        self.assertAlmostEqual(pipeline.normalization.mu, float(np.mean(self.series.values[:300])))

    def test_interval_mismatch(self):
        pipeline = fit(self.series.slice(0, 300), SMALL)
        other = generate_synthetic(1, 100, 0.1, seed=1, interval=30, start=300 * 60)
        with self.assertRaises(DataError):
            pipeline.detect_batch(other)


class TestDetection(unittest.TestCase):
    def setUp(self):
        self.series = small_series(spikes=[(350, 1.0), (480, 1.0)])
        self.train = self.series.slice(0, 300)
        self.test = self.series.slice(300)

    def test_noise_free_sine_has_no_anomaly(self):
        clean = small_series(noise=0.0)
        detections = fit(clean.slice(0, 300), SMALL).detect_batch(clean.slice(300))
        self.assertEqual(len(detections), 300)
        self.assertFalse(any(d.ensemble_verdict for d in detections))

    def test_warmup_is_never_flagged(self):
        detections = fit(self.train, SMALL).detect_batch(self.test)
        for d in detections[:SMALL.window]:
            self.assertTrue(d.warming)
            self.assertFalse(d.ensemble_verdict)
            self.assertTrue(all(out.verdict is Verdict.NORMAL for out in d.per_learner.values()))
        self.assertFalse(detections[SMALL.window].warming)

    def test_detection_fields(self):
        d = fit(self.train, SMALL).detect_batch(self.test)[50]
        self.assertEqual((d.index, d.timestamp, d.kpi_id), (50, 350 * 60, "synthetic"))
        self.assertEqual(d.value, self.test.values[50])
        for out in d.per_learner.values():
            self.assertAlmostEqual(out.error, abs(d.value - out.prediction))
            self.assertGreaterEqual(out.z, out.t)
        self.assertEqual(d.anomaly_votes, sum(o.verdict is Verdict.ANOMALY for o in d.per_learner.values()))
        self.assertEqual(Detection.from_dict(json.loads(json.dumps(d.to_dict()))), d)

    def test_spikes_are_flagged(self):
        detections = fit(self.train, SMALL).detect_batch(self.test)
        flagged = [d.index for d in detections if d.ensemble_verdict]
        self.assertIn(50, flagged)
        self.assertIn(180, flagged)

    def test_vote_threshold_monotonicity(self):
        """Relever le seuil de vote ne peut qu'enlever des alertes."""
        flagged = []
        for v in (1, 2, 3):
            cfg = replace(SMALL, vote_threshold=v)
            detections = fit(self.train, cfg).detect_batch(self.test)
            flagged.append({d.index for d in detections if d.ensemble_verdict})
        self.assertTrue(flagged[2] <= flagged[1] <= flagged[0])

    def test_single_learner_identity(self):
        cfg = replace(SMALL, learners=("stl",))
        self.assertEqual(cfg.votes_needed, 1)
        for d in fit(self.train, cfg).detect_batch(self.test):
            self.assertEqual(d.ensemble_verdict, d.per_learner["stl"].verdict is Verdict.ANOMALY)

    def test_error_average_mode(self):
        cfg = replace(SMALL, vote_mode="error_average")
        pipeline = fit(self.train, cfg)
        self.assertEqual(list(pipeline.detectors), [MEAN_DETECTOR])
        for d in pipeline.detect_batch(self.test):
            verdicts = {out.verdict for out in d.per_learner.values()}
            self.assertEqual(len(verdicts), 1)
            self.assertIsNotNone(d.mean_error)
            self.assertEqual(d.ensemble_verdict, verdicts.pop() is Verdict.ANOMALY)

    def test_deterministic(self):
        a = fit(self.train, SMALL).detect_batch(self.test)
        b = fit(self.train, SMALL).detect_batch(self.test)
        self.assertEqual(as_json(a), as_json(b))

    def test_batch_leaves_pipeline_untouched(self):
        pipeline = fit(self.train, SMALL)
        before = pipeline.to_json()
        pipeline.detect_batch(self.test)
        self.assertEqual(pipeline.to_json(), before)


def drifting_series(periods=36, noise=0.1, seed=5, drift=0.002):
    """Sinusoïde bruitée de période 100 avec une dérive linéaire, sans anomalie."""
    base = small_series(periods=periods, noise=noise, seed=seed)
    return base.with_values(base.values + drift * np.arange(len(base)))


class TestLearnerCalibration(unittest.TestCase):
    """Les erreurs d'entraînement viennent du même prédicteur que le flux."""

    def setUp(self):
        self.y = drifting_series(periods=10).values

    def test_fitted_values_replay_streaming_forecasts(self):
        learners = {
            "arima": ArimaForecaster(),
            "arima_ma": ArimaForecaster(p=2, d=0, q=1),
            "stl": StlForecaster(period=100, refresh_every=10 ** 6),
            "stl_slope": StlForecaster(period=100, extrapolation="slope", refresh_every=10 ** 6),
            "lstsvr": LsTsvrForecaster(window=10, train_size=200, refit_every=10 ** 6),
        }
        self.assertLessEqual(set(LEARNER_MAP), set(learners))
        for name, learner in learners.items():
            with self.subTest(learner=name):
                learner.fit(self.y[:700])
                fitted = learner.fitted_values(self.y)
                streamed = []
                for t in range(700, len(self.y)):
                    streamed.append(learner.predict_next(self.y[:t]))
                    learner.observe(self.y[:t + 1])
                np.testing.assert_allclose(streamed, fitted[700:], rtol=1e-9, atol=1e-9)

    def test_clean_drifting_stream_false_alarm_rate(self):
        """Sur un flux propre qui dérive, chaque détecteur reste proche du risque 1 - q."""
        series = drifting_series()
        cfg = replace(
            SMALL, pot=PotConfig(q=0.99, theta=0.95),
            stl=StlConfig(period=100, history_periods=12),
        )
        detections = fit(series.slice(0, 1200), cfg).detect_batch(series.slice(1200))
        scored = [d for d in detections if not d.warming]
        self.assertGreater(len(scored), 2000)
        for name in cfg.learners:
            with self.subTest(learner=name):
                alarms = sum(d.per_learner[name].verdict is Verdict.ANOMALY for d in scored)
                self.assertLessEqual(alarms / len(scored), 3 * (1 - cfg.pot.q))


class TestStreaming(unittest.TestCase):
    def setUp(self):
        spikes = make_anomaly_spec(2400, count=10, seed=3, start=400)
        self.series = small_series(periods=24, seed=4, spikes=spikes)
        self.train = self.series.slice(0, 300)
        self.test = self.series.slice(300)

    def test_batch_equals_stream_with_refit_every_point(self):
        """Réentraînement à chaque point : un flux et un batch indépendants donnent les mêmes verdicts."""
        cfg = replace(SMALL, lstsvr=LsTsvrConfig(train_size=60, refit_every=1))
        batch = restore(fit(self.train, cfg).to_json()).detect_batch(self.test)
        pipeline = fit(self.train, cfg)
        stream = []
        weights = pipeline.learners["lstsvr"].model.omega1.copy()
        for point in list(self.test)[:50]:
            stream.append(pipeline.stream_push(point))
            refitted = pipeline.learners["lstsvr"].model.omega1
            self.assertFalse(np.array_equal(refitted, weights))
            weights = refitted.copy()
        stream.extend(pipeline.stream_push(point) for point in list(self.test)[50:])
        self.assertGreaterEqual(len(stream), 2000)
        self.assertEqual(as_json(stream), as_json(batch))

    def test_failed_detector_step_leaves_state_unchanged(self):
        """Un échec du détecteur d'un learner n'avance aucun autre détecteur."""
        pipeline = fit(self.train, SMALL)
        points = list(self.test)
        for point in points[:SMALL.window + 5]:
            pipeline.stream_push(point)
        before = pipeline.to_json()
        calls = []

        def failing_step(state, error, index):
            calls.append(index)
            if len(calls) == 2:
                raise ComputationError("Ajustement GPD impossible.")
            return pot_step(state, error, index)

        with mock.patch("kpiensemble.ensemble.pot_step", side_effect=failing_step):
            with self.assertRaises(ComputationError):
                pipeline.stream_push(points[SMALL.window + 5])
        self.assertEqual(len(calls), 2)
        self.assertEqual(pipeline.to_json(), before)
        self.assertEqual(pipeline.index, SMALL.window + 5)
        self.assertEqual(pipeline.stream_push(points[SMALL.window + 5]).index, SMALL.window + 5)

    def test_checkpoint_resume_mid_stream(self):
        pipeline = fit(self.train, SMALL)
        points = list(self.test)
        for point in points[:700]:
            pipeline.stream_push(point)
        resumed = restore(pipeline.to_json())
        self.assertEqual(checkpoint(resumed), json.loads(pipeline.to_json()))
        rest = [pipeline.stream_push(p) for p in points[700:]]
        again = [resumed.stream_push(p) for p in points[700:]]
        self.assertEqual(as_json(rest), as_json(again))
        self.assertEqual(rest[0].index, 700)

    def test_out_of_order_leaves_state_unchanged(self):
        pipeline = fit(self.train, SMALL)
        for point in list(self.test)[:5]:
            pipeline.stream_push(point)
        before = pipeline.to_json()
        with self.assertRaises(OutOfOrderError):
            pipeline.stream_push(TimePoint(pipeline.last_timestamp, 0.0))
        with self.assertRaises(DataError):
            pipeline.stream_push(TimePoint(pipeline.last_timestamp + 61, 0.0))
        with self.assertRaises(DataError):
            pipeline.stream_push(TimePoint(pipeline.last_timestamp + 60, float("nan")))
        self.assertEqual(pipeline.to_json(), before)

    def test_gap_is_accepted(self):
        pipeline = fit(self.train, SMALL)
        d = pipeline.stream_push(TimePoint(pipeline.last_timestamp + 180, self.test.values[2]))
        self.assertEqual(d.index, 0)

    def test_corrupt_checkpoints(self):
        document = fit(self.train, SMALL).to_json()
        with self.assertRaises(CheckpointError):
            restore(document[:len(document) // 2])
        data = json.loads(document)
        data["schema_version"] = 99
        with self.assertRaises(CheckpointError):
            restore(data)
        data = json.loads(document)
        del data["learners"]["stl"]
        with self.assertRaises(CheckpointError):
            restore(data)
        data = json.loads(document)
        data["detectors"]["extra"] = data["detectors"]["stl"]
        with self.assertRaises(CheckpointError):
            restore(data)


class TestEndToEnd(unittest.TestCase):
    def test_synthetic_spikes(self):
        """Huit jours synthétiques, vingt pics : F1 >= 0.9 et meilleur que chaque learner seul."""
        spikes = [(8640 + 100 + 130 * i, 1.0) for i in range(20)]
        series = generate_synthetic(8, 1440, 0.1, spikes, seed=0)
        cfg = EnsembleConfig(pot=PotConfig(q=0.9999, theta=0.98))
        test = series.slice(8640)
        detections = fit(series.slice(0, 8640), cfg).detect_batch(test)
        truth = test.anomaly_indices
        self.assertEqual(len(truth), 20)
        rows = ablation_scores(detections, truth, T=7, mode="alone")
        self.assertEqual(len(rows), 4)
        ensemble_f1 = rows[0]["f1"]
        self.assertGreaterEqual(ensemble_f1, 0.9)
        self.assertAlmostEqual(
            ensemble_f1,
            windowed_prf([d.index for d in detections if d.ensemble_verdict], truth, 7).f1,
        )
        for row in rows[1:]:
            with self.subTest(row=row["name"]):
                self.assertGreaterEqual(ensemble_f1, row["f1"])


if __name__ == '__main__':
    unittest.main()
