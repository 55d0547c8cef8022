"""
Test unitaire du modèle de série temporelle, de l'ingestion CSV et du générateur synthétique.
"""
import os
import tempfile
import unittest

import numpy as np

from kpiensemble.data import (
    CsvSchema,
    DataLoader,
    Series,
    TimePoint,
    denormalize,
    describe,
    generate_synthetic,
    load_csv,
    make_anomaly_spec,
    modal_interval,
    normalize,
    write_csv,
)
from kpiensemble.exceptions import ConfigError, DataError


class TestSeries(unittest.TestCase):
    def setUp(self):
        self.series = Series.from_arrays("cpu", [0, 60, 180, 240], [0.5, 0.7, 0.6, 0.9],
                                         labels=[False, False, True, False])

    def test_interval_and_gaps(self):
        """L'intervalle modal est inféré, les trous sont autorisés."""
        self.assertEqual(self.series.interval, 60)
        self.assertEqual(len(self.series), 4)
        self.assertEqual(self.series.anomaly_indices.tolist(), [2])

    def test_rejects_unordered_offgrid_nonfinite(self):
        with self.assertRaises(DataError):
            Series.from_arrays("k", [0, 120, 60], [1.0, 2.0, 3.0], interval=60)
        with self.assertRaises(DataError):
            Series.from_arrays("k", [0, 60, 150], [1.0, 2.0, 3.0], interval=60)
        with self.assertRaises(DataError):
            Series.from_arrays("k", [0, 60, 120], [1.0, np.nan, 3.0])
        with self.assertRaises(DataError):
            Series("k", (), 60)

    def test_values_read_only(self):
        with self.assertRaises(ValueError):
            self.series.values[0] = 10.0

    def test_modal_interval(self):
        self.assertEqual(modal_interval([0, 60, 120, 300, 360]), 60)
        with self.assertRaises(DataError):
            modal_interval([0])


class TestNormalize(unittest.TestCase):
    def test_zero_mean_unit_std(self):
        s = Series.from_arrays("k", np.arange(10) * 60, np.linspace(3.0, 12.0, 10))
        z, params = normalize(s)
        stats = describe(z)
        self.assertAlmostEqual(stats.mean, 0.0, places=12)
        self.assertAlmostEqual(stats.std, 1.0, places=12)
        np.testing.assert_allclose(denormalize(z, params).values, s.values, rtol=1e-12)

    def test_constant_or_short(self):
        with self.assertRaises(DataError):
            normalize(Series.from_arrays("k", [0, 60, 120], [2.0, 2.0, 2.0]))
        with self.assertRaises(DataError):
            normalize(Series.from_arrays("k", [0], [2.0], interval=60))

    def test_describe_quartiles(self):
        stats = describe(Series.from_arrays("k", [0, 60, 120, 180], [1, 2, 3, 4]))
        self.assertEqual((stats.count, stats.min, stats.q50, stats.max), (4, 1.0, 2.5, 4.0))
        self.assertAlmostEqual(stats.q25, 1.75)
        self.assertEqual(list(stats.as_table().index)[:2], ["Count", "Avg"])


class TestDataLoader(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "kpi.csv")

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, text):
        with open(self.path, "w", encoding="utf-8") as handle:
            handle.write(text)

    def test_multi_kpi_sorted(self):
        """Une série par identifiant, points triés par horodatage."""
        self._write(
            "timestamp,value,label,KPI ID\n"
            "120,3.0,0,b\n"
            "0,1.0,0,a\n"
            "60,2.0,1,a\n"
            "0,5.0,,b\n"
        )
        series = load_csv(self.path)
        self.assertEqual([s.id for s in series], ["a", "b"])
        self.assertEqual(series[0].values.tolist(), [1.0, 2.0])
        self.assertEqual(series[0].labels.tolist(), [False, True])
        self.assertEqual(series[1].timestamps.tolist(), [0, 120])

    def test_iso_timestamps_and_custom_schema(self):
        self._write("ts,v\n2024-01-01T00:00:00Z,1.5\n2024-01-01T00:01:00Z,2.5\n")
        series = DataLoader(CsvSchema(timestamp="ts", value="v")).load_csv(self.path)
        self.assertEqual(series[0].interval, 60)
        self.assertEqual(series[0].timestamps[0], 1704067200)
        self.assertEqual(series[0].id, "kpi")

    def test_bad_row_names_line(self):
        self._write("timestamp,value\n0,1.0\n60,abc\n")
        with self.assertRaises(DataError) as ctx:
            load_csv(self.path)
        self.assertIn("ligne 3", str(ctx.exception))

    def test_duplicate_timestamp(self):
        self._write("timestamp,value\n0,1.0\n60,2.0\n60,3.0\n")
        with self.assertRaises(DataError) as ctx:
            load_csv(self.path)
        self.assertIn("dupliqué", str(ctx.exception))

    def test_missing_column_and_file(self):
        self._write("time,value\n0,1.0\n")
        with self.assertRaises(DataError):
            load_csv(self.path)
        with self.assertRaises(FileNotFoundError) as ctx:
            load_csv(os.path.join(self.tmp.name, "absent.csv"))
        self.assertIn("absent.csv", str(ctx.exception))

    def test_write_then_read_keeps_values(self):
        s = generate_synthetic(1, 100, 0.1, [(10, 1.0)], seed=3)
        write_csv([s], self.path)
        back = load_csv(self.path)[0]
        self.assertEqual(back.id, s.id)
        np.testing.assert_array_equal(back.values, s.values)
        self.assertEqual(back.anomaly_indices.tolist(), [10])


class TestSynthetic(unittest.TestCase):
    def test_default_shape(self):
        spec = make_anomaly_spec(11520, count=20, magnitude=1.0, seed=0)
        s = generate_synthetic(8, 1440, 0.1, spec, seed=0)
        self.assertEqual(len(s), 11520)
        self.assertEqual(int(s.labels.sum()), 20)
        self.assertEqual(s.interval, 60)

    def test_deterministic_under_seed(self):
        a = generate_synthetic(2, 50, 0.2, seed=11)
        b = generate_synthetic(2, 50, 0.2, seed=11)
        c = generate_synthetic(2, 50, 0.2, seed=12)
        np.testing.assert_array_equal(a.values, b.values)
        self.assertFalse(np.array_equal(a.values, c.values))

    def test_noise_free_is_sine(self):
        s = generate_synthetic(1, 40, 0.0, seed=0)
        np.testing.assert_allclose(s.values, np.sin(2 * np.pi * np.arange(40) / 40), atol=1e-15)

    def test_spike_spacing(self):
        spec = make_anomaly_spec(2880, count=20, seed=5, start=100, min_gap=15)
        idx = [i for i, _ in spec]
        self.assertTrue(all(i >= 100 for i in idx))
        self.assertGreaterEqual(int(np.diff(idx).min()), 15)

    def test_invalid_parameters(self):
        with self.assertRaises(ConfigError):
            generate_synthetic(1, 10, 0.1, [(10, 1.0)])
        with self.assertRaises(ConfigError):
            make_anomaly_spec(100, count=20, min_gap=15)


if __name__ == '__main__':
    unittest.main()
