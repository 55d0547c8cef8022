"""
Test unitaire du F1 fenêtré et des métriques de prévision.
"""
import unittest

import numpy as np
from scipy.optimize import linear_sum_assignment

from kpiensemble.evaluation import Evaluator, forecast_metrics, windowed_prf
from kpiensemble.exceptions import ConfigError, DataError


def optimal_tp(pred, truth, T):
    """Couplage maximal par affectation (oracle force brute)."""
    pred, truth = sorted(set(pred)), sorted(set(truth))
    if not pred or not truth:
        return 0
    adjacency = np.array([[abs(p - g) <= T for g in truth] for p in pred], dtype=int)
    rows, cols = linear_sum_assignment(adjacency, maximize=True)
    return int(adjacency[rows, cols].sum())


class TestWindowedPrf(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)

    def _random_instance(self, max_size=8, span=40):
        pred = self.rng.integers(0, span, size=self.rng.integers(0, max_size + 1)).tolist()
        truth = self.rng.integers(0, span, size=self.rng.integers(0, max_size + 1)).tolist()
        return pred, truth

    def test_reference_examples(self):
        r = windowed_prf([103], [100], T=7)
        self.assertEqual((r.tp, r.fp, r.fn, r.f1), (1, 0, 0, 1.0))
        r = windowed_prf([120], [100], T=7)
        self.assertEqual((r.tp, r.fp, r.fn, r.f1), (0, 1, 1, 0.0))
        r = windowed_prf([103, 500], [100], T=7)
        self.assertEqual((r.precision, r.recall), (0.5, 1.0))
        self.assertAlmostEqual(r.f1, 2 / 3)

    def test_greedy_matches_optimal_matching(self):
        """Le couplage glouton atteint le couplage maximal sur 200 instances aléatoires."""
        for _ in range(200):
            pred, truth = self._random_instance()
            T = int(self.rng.integers(0, 6))
            with self.subTest(pred=pred, truth=truth, T=T):
                self.assertEqual(windowed_prf(pred, truth, T).tp, optimal_tp(pred, truth, T))

    def test_zero_window_is_intersection(self):
        for _ in range(200):
            pred, truth = self._random_instance()
            r = windowed_prf(pred, truth, T=0)
            self.assertEqual(r.tp, len(set(pred) & set(truth)))

    def test_swap_exchanges_precision_and_recall(self):
        for _ in range(100):
            pred, truth = self._random_instance()
            a = windowed_prf(pred, truth, 3)
            b = windowed_prf(truth, pred, 3)
            self.assertEqual((a.precision, a.recall, a.tp), (b.recall, b.precision, b.tp))

    def test_bounds_on_fuzzed_inputs(self):
        for _ in range(300):
            pred, truth = self._random_instance(max_size=20, span=100)
            r = windowed_prf(pred, truth, int(self.rng.integers(0, 10)))
            self.assertLessEqual(r.tp, min(len(set(pred)), len(set(truth))))
            for value in (r.precision, r.recall, r.f1):
                self.assertTrue(0.0 <= value <= 1.0)

    def test_one_truth_matches_one_prediction(self):
        r = windowed_prf([98, 101, 104], [100], T=7)
        self.assertEqual((r.tp, r.fp, r.fn), (1, 2, 0))

    def test_many_to_one(self):
        r = windowed_prf([98, 101, 104], [100], T=7, one_to_one=False)
        self.assertEqual((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0))
        r = windowed_prf([100, 300], [99, 102, 200], T=3, one_to_one=False)
        self.assertEqual(r.precision, 0.5)
        self.assertAlmostEqual(r.recall, 2 / 3)

    def test_empty_sets(self):
        r = windowed_prf([], [5, 9])
        self.assertEqual((r.precision, r.recall, r.f1, r.fn), (0.0, 0.0, 0.0, 2))
        self.assertEqual(windowed_prf([], []).f1, 0.0)

    def test_invalid_arguments(self):
        with self.assertRaises(ConfigError):
            windowed_prf([1], [1], T=-1)
        with self.assertRaises(DataError):
            windowed_prf([-3], [1])

    def test_evaluator_dict(self):
        report = Evaluator.evaluate_all([10, 50], [12], T=2)
        self.assertEqual(set(report), {"tp", "fp", "fn", "precision", "recall", "f1", "t_window"})
        self.assertEqual(report["t_window"], 2)


class TestForecastMetrics(unittest.TestCase):
    def test_values(self):
        self.assertEqual(forecast_metrics([0.0, 0.0], [1.0, -1.0]), (1.0, 1.0))
        mse, mae = forecast_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 5.0])
        self.assertAlmostEqual(mse, 4.0 / 3.0)
        self.assertAlmostEqual(mae, 2.0 / 3.0)
        self.assertEqual(Evaluator.forecast([2.0], [2.0]), {"mse": 0.0, "mae": 0.0})

    def test_invalid(self):
        with self.assertRaises(DataError):
            forecast_metrics([1.0, 2.0], [1.0])
        with self.assertRaises(DataError):
            forecast_metrics([], [])


if __name__ == '__main__':
    unittest.main()
