"""
Test unitaire de l'entropie de permutation et de l'analyse exploratoire des séries.
"""
import unittest

import numpy as np

from kpiensemble.analyzer import SeriesAnalyzer, entropy_overlay, permutation_entropy
from kpiensemble.data import Series, generate_synthetic
from kpiensemble.exceptions import ConfigError, DataError


class TestPermutationEntropy(unittest.TestCase):
    def setUp(self):
        self.noise = np.random.default_rng(0).normal(size=2000)

    def test_monotone_window_is_zero(self):
        profile = permutation_entropy(np.arange(200.0), order=3, window=60)
        self.assertEqual(len(profile), 141)
        self.assertTrue(np.all(profile.values == 0.0))
        self.assertTrue(np.all(permutation_entropy(-np.arange(80.0)).values == 0.0))

    def test_constant_window_is_zero(self):
        self.assertTrue(np.all(permutation_entropy(np.full(100, 4.2)).values == 0.0))

    def test_uniform_patterns_give_one(self):
        """Montées et descentes en alternance : les deux motifs d'ordre 2 à parts égales."""
        x = np.tile([0.0, 1.0], 50)
        profile = permutation_entropy(x, order=2, window=21)
        np.testing.assert_allclose(profile.values, 1.0, atol=1e-12)

    def test_white_noise_is_near_one(self):
        profile = permutation_entropy(self.noise, order=3, window=600)
        self.assertGreater(profile.values.min(), 0.95)
        self.assertLessEqual(profile.values.max(), 1.0)

    def test_invariant_under_monotone_transform(self):
        a = permutation_entropy(self.noise, order=4, window=120).values
        b = permutation_entropy(np.exp(self.noise) * 3.0 + 1.0, order=4, window=120).values
        np.testing.assert_array_equal(a, b)

    def test_end_alignment(self):
        profile = permutation_entropy(self.noise[:100], order=3, window=60)
        self.assertEqual(profile.end_indices[0], 59)
        self.assertEqual(profile.end_indices[-1], 99)

    def test_invalid_parameters(self):
        with self.assertRaises(ConfigError):
            permutation_entropy(self.noise, order=1, window=60)
        with self.assertRaises(ConfigError):
            permutation_entropy(self.noise, order=8, window=400_000)
        with self.assertRaises(ConfigError):
            permutation_entropy(self.noise, order=3, window=10)
        with self.assertRaises(DataError):
            permutation_entropy(self.noise[:30], order=3, window=60)
        with self.assertRaises(DataError):
            permutation_entropy(np.r_[self.noise[:99], np.nan], order=3, window=60)


class TestSeriesAnalyzer(unittest.TestCase):
    def setUp(self):
        clean = generate_synthetic(2, 1440, 0.0, seed=0)
        noise = np.r_[np.zeros(1440), np.random.default_rng(1).normal(scale=0.3, size=1440)]
        self.series = clean.with_values(clean.values + noise)

    def test_noisy_chunk_has_higher_entropy(self):
        chunks = SeriesAnalyzer(self.series).chunk_entropy(2)
        self.assertEqual(list(chunks.index), ["chunk1", "chunk2"])
        self.assertGreater(chunks["chunk2"], chunks["chunk1"])

    def test_overlay_rows(self):
        frame = SeriesAnalyzer(self.series).overlay(order=3, window=60)
        self.assertEqual(list(frame.columns), ["timestamp", "value", "entropy"])
        self.assertEqual(len(frame), len(self.series) - 59)
        self.assertEqual(frame["timestamp"].iloc[0], self.series.timestamps[59])
        self.assertTrue(frame["entropy"].between(0.0, 1.0).all())

    def test_misaligned_overlay(self):
        short = Series.from_arrays("k", np.arange(80) * 60, np.arange(80.0))
        with self.assertRaises(DataError):
            entropy_overlay(short, permutation_entropy(self.series.values, 3, 60))

    def test_describe_and_chunk_errors(self):
        table = SeriesAnalyzer(self.series).describe()
        self.assertEqual(table["Count"], len(self.series))
        with self.assertRaises(ConfigError):
            SeriesAnalyzer(self.series).chunk_entropy(100)


if __name__ == '__main__':
    unittest.main()
