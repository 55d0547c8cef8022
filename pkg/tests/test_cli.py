"""
Test unitaire de l'interface en ligne de commande (detect, stream, eval, synth, entropy).
"""
import io
import json
import os
import re
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from unittest import mock

from kpiensemble.cli import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_IO,
    EXIT_OK,
    main,
    read_detections,
    write_detections,
)
from kpiensemble.data import generate_synthetic, load_csv, write_csv
from kpiensemble.ensemble import Detection, LearnerOutput
from kpiensemble.evt.pot import Verdict

SMALL_CONF = """\
# configuration réduite pour les tests
stl.period = 100
window = 10
lstsvr.train_size = 100
lstsvr.refit_every = 100
pot.q = 0.999
"""


def run_cli(*argv, stdin=None):
    """Exécute main(argv) et renvoie (code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        if stdin is None:
            code = main(list(argv))
        else:
            with mock.patch("sys.stdin", io.StringIO(stdin)):
                code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.conf = self.path("small.conf")
        with open(self.conf, "w", encoding="utf-8") as handle:
            handle.write(SMALL_CONF)
        series = generate_synthetic(8, 100, 0.1, [(350, 1.0), (520, 1.0), (700, 1.0)], seed=0, id="cpu")
        self.train_series = series.slice(0, 300)
        self.test_series = series.slice(300)
        self.train = self.path("train.csv")
        self.test = self.path("test.csv")
        write_csv([self.train_series], self.train)
        write_csv([self.test_series], self.test)

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def points_file(self, name, points, extra=()):
        lines = [json.dumps({"timestamp": int(p.timestamp), "value": p.value}) for p in points]
        with open(self.path(name), "w", encoding="utf-8") as handle:
            handle.write("\n".join(list(lines) + list(extra)) + "\n")
        return self.path(name)


class TestSynthAndEntropy(CliTestCase):
    def test_synth_defaults(self):
        out = self.path("synth.csv")
        code, _, err = run_cli("synth", "-o", out, "--seed", "7")
        self.assertEqual(code, EXIT_OK)
        series = load_csv(out)[0]
        self.assertEqual(len(series), 11520)
        self.assertEqual(int(series.labels.sum()), 20)
        self.assertIn("11520 points", err)

    def test_synth_is_deterministic(self):
        a, b = self.path("a.csv"), self.path("b.csv")
        run_cli("synth", "-o", a, "--periods", "2", "--period-len", "100", "--anomalies", "2")
        run_cli("synth", "-o", b, "--periods", "2", "--period-len", "100", "--anomalies", "2")
        with open(a, encoding="utf-8") as fa, open(b, encoding="utf-8") as fb:
            self.assertEqual(fa.read(), fb.read())

    def test_entropy_defaults(self):
        out = self.path("entropy.csv")
        code, _, _ = run_cli("entropy", self.train, "-o", out)
        self.assertEqual(code, EXIT_OK)
        with open(out, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
        self.assertEqual(lines[0], "kpi_id,timestamp,value,entropy")
        self.assertEqual(len(lines) - 1, 300 - 59)

    def test_entropy_bad_order(self):
        code, _, err = run_cli("entropy", self.train, "--order", "1")
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("ordre", err)

    def test_no_command(self):
        code, _, _ = run_cli()
        self.assertEqual(code, EXIT_CONFIG)


class TestDetect(CliTestCase):
    def detect(self, output, *extra):
        return run_cli("detect", "--config", self.conf, "--train", self.train, "--test", self.test,
                       "-o", output, "-q", *extra)

    def test_jsonl_output(self):
        out = self.path("det.jsonl")
        code, stdout, _ = self.detect(out)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(stdout, "")
        with open(out, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
        self.assertEqual(len(lines), 1 + len(self.test_series))
        meta = json.loads(lines[0])["meta"]
        self.assertEqual(meta["vote_threshold"], 2)
        self.assertEqual(len(meta["config_hash"]), 64)
        meta, detections = read_detections(out)
        self.assertEqual(detections[0].kpi_id, "cpu")
        self.assertEqual(detections[-1].timestamp, int(self.test_series.timestamps[-1]))

    def test_deterministic_reruns(self):
        a, b = self.path("a.jsonl"), self.path("b.jsonl")
        self.detect(a)
        self.detect(b)
        with open(a, encoding="utf-8") as fa, open(b, encoding="utf-8") as fb:
            self.assertEqual(fa.read(), fb.read())

    def test_csv_output_reads_back(self):
        out = self.path("det.csv")
        code, _, _ = self.detect(out, "--format", "csv")
        self.assertEqual(code, EXIT_OK)
        meta, detections = read_detections(out)
        self.assertEqual(meta["tool"], "kpiensemble")
        self.assertEqual(len(detections), len(self.test_series))
        _, from_jsonl = read_detections(self._jsonl_copy())
        self.assertEqual([d.ensemble_verdict for d in detections], [d.ensemble_verdict for d in from_jsonl])

    def _jsonl_copy(self):
        out = self.path("copy.jsonl")
        self.detect(out)
        return out

    def test_missing_file(self):
        missing = self.path("absent.csv")
        code, _, err = run_cli("detect", "--train", missing, "--test", self.test)
        self.assertEqual(code, EXIT_IO)
        self.assertIn(missing, err)

    def test_short_training(self):
        short = self.path("short.csv")
        write_csv([self.train_series.slice(0, 50)], short)
        code, _, _ = run_cli("detect", "--config", self.conf, "--train", short, "--test", self.test, "-q")
        self.assertEqual(code, EXIT_DATA)

    def test_bad_override(self):
        code, _, err = run_cli("detect", "--set", "pot.colour=1", "--train", self.train, "--test", self.test)
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("pot.colour", err)


class TestEval(CliTestCase):
    def write_perfect(self, path, flag=True):
        dets = [
            Detection(i, int(p.timestamp), p.value,
                      {"stl": LearnerOutput(p.value, 0.0, Verdict.ANOMALY if p.label else Verdict.NORMAL, 0.0, 1.0)},
                      bool(p.label) and flag, kpi_id="cpu")
            for i, p in enumerate(self.test_series)
        ]
        with open(path, "w", encoding="utf-8") as handle:
            write_detections(dets, handle, "jsonl", {"vote_threshold": 1})

    def test_perfect_predictions(self):
        dets = self.path("perfect.jsonl")
        self.write_perfect(dets)
        code, stdout, _ = run_cli("eval", dets, "--labels", self.test)
        self.assertEqual(code, EXIT_OK)
        report = json.loads(stdout)
        self.assertEqual(report["T"], 7)
        self.assertEqual(report["results"][0]["f1"], 1.0)
        self.assertEqual(report["results"][0]["tp"], 3)

    def test_empty_predictions(self):
        dets = self.path("empty.jsonl")
        self.write_perfect(dets, flag=False)
        _, stdout, _ = run_cli("eval", dets, "--labels", self.test, "-T", "3")
        result = json.loads(stdout)["results"][0]
        self.assertEqual((result["precision"], result["recall"], result["t_window"]), (0.0, 0.0, 3))

    def test_ablation_rows(self):
        dets = self.path("det.jsonl")
        run_cli("detect", "--config", self.conf, "--train", self.train, "--test", self.test, "-o", dets, "-q")
        out = self.path("report.json")
        code, _, _ = run_cli("eval", dets, "--labels", self.test, "--ablation", "-o", out)
        self.assertEqual(code, EXIT_OK)
        with open(out, encoding="utf-8") as handle:
            report = json.load(handle)
        self.assertEqual([r["name"] for r in report["ablation"]],
                         ["ensemble", "without_arima", "without_stl", "without_lstsvr"])
        self.assertEqual(report["ablation"][0]["f1"], report["results"][0]["f1"])

    def test_misaligned_files(self):
        dets = self.path("perfect.jsonl")
        self.write_perfect(dets)
        code, _, err = run_cli("eval", dets, "--labels", self.train)
        self.assertEqual(code, EXIT_DATA)
        self.assertIn("non alignés", err)


class TestStream(CliTestCase):
    def stream(self, *extra, stdin=None):
        return run_cli("stream", "--config", self.conf, "-q", *extra, stdin=stdin)

    def test_stream_matches_detect(self):
        points = self.points_file("points.jsonl", self.test_series)
        code, stdout, err = self.stream("--train", self.train, "--input", points)
        self.assertEqual(code, EXIT_OK)
        streamed = [Detection.from_dict(json.loads(line)) for line in stdout.splitlines()]
        batch = self.path("det.jsonl")
        run_cli("detect", "--config", self.conf, "--train", self.train, "--test", self.test, "-o", batch, "-q")
        _, detections = read_detections(batch)
        self.assertEqual(streamed, detections)
        rate = float(re.search(r"\(([\d.]+) pts/s\)", err).group(1))
        self.assertGreaterEqual(rate, 10.0)

    def test_full_synthetic_stream_default_config(self):
        """Flux synthétique complet (8 x 1440 points) avec la configuration par défaut."""
        train = self.path("train_default.csv")
        write_csv([generate_synthetic(2, 1440, 0.1, seed=1)], train)
        synth = self.path("stream.csv")
        run_cli("synth", "-o", synth, "--seed", "7", "--start", str(2 * 1440 * 60))
        points = self.points_file("stream.jsonl", load_csv(synth)[0])
        code, stdout, err = run_cli("stream", "-q", "--train", train, "--input", points)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(stdout.splitlines()), 11520)
        rate = float(re.search(r"\(([\d.]+) pts/s\)", err).group(1))
        self.assertGreaterEqual(rate, 10.0)

    def test_malformed_and_rejected_lines(self):
        points = list(self.test_series)[:20]
        lines = [json.dumps({"timestamp": int(p.timestamp), "value": p.value}) for p in points]
        lines.insert(5, "pas du json")
        lines.insert(8, json.dumps({"timestamp": int(points[0].timestamp), "value": 1.0}))
        lines.insert(10, json.dumps({"value": 1.0}))
        code, stdout, err = self.stream("--train", self.train, stdin="\n".join(lines) + "\n")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(stdout.splitlines()), 20)
        self.assertIn("2 lignes ignorées, 1 rejetées", err)

    def test_resume_continues_identically(self):
        points = list(self.test_series)
        full = self.points_file("full.jsonl", points)
        first = self.points_file("first.jsonl", points[:250])
        second = self.points_file("second.jsonl", points[250:])
        state = self.path("state.json")
        _, expected, _ = self.stream("--train", self.train, "--input", full)
        _, head, _ = self.stream("--train", self.train, "--input", first, "--checkpoint-out", state)
        self.assertTrue(os.path.isfile(state))
        _, tail, _ = self.stream("--resume", state, "--input", second)
        self.assertEqual(head + tail, expected)

    def test_periodic_checkpoint(self):
        points = self.points_file("points.jsonl", list(self.test_series)[:30])
        state = self.path("state.json")
        self.stream("--train", self.train, "--input", points, "--checkpoint-out", state,
                    "--checkpoint-every", "10")
        with open(state, encoding="utf-8") as handle:
            self.assertEqual(json.load(handle)["index"], 30)

    def test_missing_checkpoint(self):
        code, _, err = self.stream("--resume", self.path("absent.json"), stdin="")
        self.assertEqual(code, EXIT_IO)
        self.assertIn("absent.json", err)

    def test_requires_training_data(self):
        code, _, _ = self.stream(stdin="")
        self.assertEqual(code, EXIT_CONFIG)


if __name__ == '__main__':
    unittest.main()
