import csv
import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from openworld import UNKNOWN, StreamEvent
from openworld.evaluation import (OnlineAccuracy, OpenWorldEvaluator, harmonic_mean, is_hit, score_open_world,
                                  read_reports_jsonl, write_reports_jsonl, write_reports_table, write_rows)
from openworld.solution import RunSolution


class AccuracyTests(unittest.TestCase):

    def test_record(self):
        acc = OnlineAccuracy()
        acc.record(True)
        self.assertEqual(acc.value, 1)
        for i in range(19):
            acc.record(i % 2 == 1)
        self.assertAlmostEqual(acc.value, 10/20)

    def test_running_mean_matches_batch(self):
        rng = np.random.default_rng(0)
        hits = rng.random(1000) < 0.3
        acc = OnlineAccuracy()
        for hit in hits:
            acc.record(hit)
        self.assertAlmostEqual(acc.value, np.mean(hits), delta=1e-9)
        self.assertEqual(acc.count, 1000)

    def test_harmonic_mean(self):
        self.assertAlmostEqual(harmonic_mean(0.8, 0.8), 0.8)
        self.assertEqual(harmonic_mean(1, 0), 0)
        self.assertEqual(harmonic_mean(0, 0), 0)
        self.assertAlmostEqual(harmonic_mean(0.5, 1), 2/3)

    def test_is_hit(self):
        self.assertTrue(is_hit(3, 3, True))
        self.assertFalse(is_hit(UNKNOWN, 3, True))
        self.assertTrue(is_hit(UNKNOWN, 3, False))
        self.assertFalse(is_hit(3, 3, False))

    def test_score_open_world(self):
        closed, open_, hm = score_open_world([(1, 1, True), (2, 1, True), (UNKNOWN, 5, False)])
        self.assertAlmostEqual(closed, 0.5)
        self.assertEqual(open_, 1)
        self.assertAlmostEqual(hm, 2/3)


def _events():
    return [(StreamEvent(np.zeros(2), 0, True, 1), 0, 0.9, 0.5),
            (StreamEvent(np.zeros(2), 1, True, 1), UNKNOWN, 0.2, 0.5),
            (StreamEvent(np.zeros(2), 7, False, 1), UNKNOWN, 0.1, 0.5),
            (StreamEvent(np.zeros(2), 0, True, 2), 0, 0.8, 0.7)]


class EvaluatorTests(unittest.TestCase):

    def _run(self):
        evaluator = OpenWorldEvaluator()
        segment = 1
        for event, prediction, confidence, threshold in _events():
            if event.segment != segment:
                evaluator.close_segment(segment)
                segment = event.segment
            evaluator.record(event, prediction, confidence, threshold)
        evaluator.close_segment(segment)
        evaluator.close_segment(3)
        return evaluator

    def test_reports(self):
        evaluator = self._run()
        first, second, empty = evaluator.reports
        self.assertAlmostEqual(first.closed_acc, 0.5)
        self.assertEqual(first.open_acc, 1)
        self.assertAlmostEqual(first.harmonic, 2/3)
        self.assertAlmostEqual(first.mean_closed_confidence, 0.55)
        self.assertAlmostEqual(first.mean_open_confidence, 0.1)
        self.assertAlmostEqual(first.mean_threshold, 0.5)
        self.assertEqual(first.samples, 3)
        self.assertAlmostEqual(second.closed_acc, 2/3)
        self.assertEqual(second.segment_closed_acc, 1)
        self.assertIsNone(second.mean_open_confidence)
        self.assertEqual(empty.samples, 0)
        self.assertIsNone(empty.mean_threshold)
        self.assertAlmostEqual(empty.harmonic, harmonic_mean(2/3, 1))
        self.assertAlmostEqual(evaluator.window_accuracy(2), 0.5)

    def test_files(self):
        evaluator = self._run()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "segments.jsonl")
            write_reports_jsonl(evaluator.reports, path)
            self.assertEqual(read_reports_jsonl(path), evaluator.reports)
            path = os.path.join(tmp, "segments.csv")
            write_reports_table(evaluator.reports, path)
            with open(path) as f:
                rows = list(csv.reader(f))
            self.assertEqual(rows[0], ["segment", "closed", "open", "harmonic", "cc", "oc", "thr"])
            self.assertEqual(len(rows), 4)
            self.assertEqual(rows[3][4], "")
            table = pd.read_csv(path)
            self.assertEqual(table["segment"].tolist(), [r.segment_index for r in evaluator.reports])
            self.assertAlmostEqual(table["harmonic"].iloc[0], evaluator.reports[0].harmonic)
            path = os.path.join(tmp, "rows.csv")
            write_rows([{"classes": 1, "accuracy": 0.25}, {"classes": 2, "accuracy": 0.5}], path)
            with open(path) as f:
                rows = list(csv.DictReader(f))
            self.assertEqual(rows[1], {"classes": "2", "accuracy": "0.5"})

    def test_solution(self):
        sol = RunSolution(self._run())
        segments, hm = sol.sample("harmonic")
        self.assertEqual(segments.tolist(), [1, 2, 3])
        self.assertAlmostEqual(hm[0], 2/3)
        self.assertTrue(np.isnan(sol.gist[2, 5]))
        self.assertAlmostEqual(sol.value("closed_acc"), 2/3)
        self.assertEqual(sol.stats["open_events"], 1)
        with self.assertRaises(Exception):
            sol.sample("nonsense")


if __name__ == '__main__':
    unittest.main()
