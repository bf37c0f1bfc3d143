import math
import unittest

import numpy as np
from numpy.testing import assert_array_almost_equal
from scipy.special import gamma as gamma_function

from openworld import OnnoClassifier, BaselineNnoClassifier, UNKNOWN
from openworld.exceptions import InvalidInputError
from openworld.nno import NoveltyState, nno_normalizer, THETA_FLOOR
from problems import random_stream, trained_onno


class NoveltyStateTests(unittest.TestCase):

    def test_initial(self):
        state = NoveltyState()
        self.assertEqual((state.theta, state.tau, state.t, state.t_star), (1.0, 0.0, 1, 0))

    def test_bandwidth_first_update_replaces(self):
        state = NoveltyState()
        state.update_bandwidth(7.0)
        self.assertEqual(state.theta, 7.0)
        self.assertEqual(state.t, 2)
        state.update_bandwidth(3.0)
        self.assertEqual(state.theta, 5.0)

    def test_bandwidth_floor(self):
        state = NoveltyState()
        state.update_bandwidth(0.0)
        self.assertEqual(state.theta, THETA_FLOOR)

    def test_threshold_reset(self):
        state = NoveltyState()
        state.update_threshold(0.8, False)
        state.update_threshold(0.4, False)
        self.assertAlmostEqual(state.tau, 0.6)
        state.update_threshold(0.9, True)
        self.assertEqual((state.tau, state.t_star), (0.0, 0))
        state.update_threshold(0.3, False)
        self.assertAlmostEqual(state.tau, 0.3)


class OnnoTests(unittest.TestCase):

    def test_rbf_confidence(self):
        clf = OnnoClassifier(2, gamma=0)
        clf.learn_open([0, 0], 0)
        self.assertEqual(clf.rbf_confidence([0, 0], 0), 1.0)
        clf.novelty.theta = 0.5
        self.assertAlmostEqual(clf.rbf_confidence([1, 0], 0), math.exp(-1))
        with self.assertRaises(InvalidInputError):
            clf.rbf_confidence([0, 0], 3)

    def test_predict_open_rejects(self):
        clf = trained_onno()
        self.assertGreater(clf.threshold, 0)
        label, confidence = clf.predict_open([2.5, 30])
        self.assertIs(label, UNKNOWN)
        label, _ = clf.predict_open([5, 0])
        self.assertEqual(label, 1)

    def test_boundary_is_rejected(self):
        clf = OnnoClassifier(1, gamma=0)
        clf.learn_open([0], 0)
        clf.novelty.theta = 1.0
        clf.novelty.tau = math.exp(-0.5)
        self.assertIs(clf.predict_open([1])[0], UNKNOWN)
        self.assertEqual(clf.predict_open([0.99])[0], 0)

    def test_running_statistics_match_batch(self):
        rng = np.random.default_rng(7)
        xs, ys = random_stream(rng, n=1000, d=3, n_classes=4)
        clf = OnnoClassifier(3, gamma=0)
        sums, confidences = [], []
        for x, y in zip(xs, ys):
            if clf.classes:
                _, dist = clf.class_distances(x)
                sums.append(np.sum(dist))
                if y in clf.classes:
                    confidences.append(clf.rbf_confidence(x, y))
                else:
                    confidences = []
            clf.learn_open(x, y)
        self.assertAlmostEqual(clf.novelty.theta, np.mean(sums), delta=1e-9*np.mean(sums))
        self.assertAlmostEqual(clf.threshold, np.mean(confidences) if confidences else 0.0, delta=1e-9)
        self.assertEqual(clf.novelty.t_star, len(confidences))

    def test_novel_class_resets_threshold(self):
        clf = trained_onno()
        self.assertGreater(clf.novelty.t_star, 0)
        clf.learn_open([0, 9], 5)
        self.assertEqual(clf.threshold, 0.0)
        self.assertEqual(clf.novelty.t_star, 0)
        self.assertIn(5, clf.classes)

    def test_freeze_fixes_metric_and_threshold(self):
        clf = trained_onno(gamma=0.05)
        clf.freeze()
        state = clf.novelty.copy()
        W = clf.metric.W
        clf.learn_open([0, 9], 5)
        clf.learn_open([0.2, 0.1], 0)
        self.assertEqual(clf.novelty.tau, state.tau)
        self.assertEqual(clf.novelty.t_star, state.t_star)
        # the bandwidth keeps following the class means
        self.assertEqual(clf.novelty.t, state.t + 2)
        self.assertIs(clf.metric.W, W)
        self.assertIn(5, clf.classes)

    def test_skipped_sample_leaves_state(self):
        clf = trained_onno()
        state = clf.novelty.copy()
        clf.learn_open([np.inf, 0], 0)
        self.assertEqual(clf.skipped, 1)
        self.assertEqual(clf.novelty.to_snapshot(), state.to_snapshot())

    def test_snapshot(self):
        clf = trained_onno(gamma=0.05)
        restored = OnnoClassifier.from_snapshot(clf.to_snapshot())
        self.assertEqual(restored.novelty.to_snapshot(), clf.novelty.to_snapshot())
        for x in [[0, 0], [2.5, 30], [5, 0.2]]:
            self.assertEqual(restored.predict_open(x), clf.predict_open(x))


class BaselineNnoTests(unittest.TestCase):

    def test_normalizer(self):
        self.assertAlmostEqual(nno_normalizer(2, 1.0), 1/math.pi, delta=1e-12)
        for m, tau in [(1, 0.5), (3, 2.0), (6, 1.5)]:
            expected = gamma_function(m/2 + 1)/(math.pi**(m/2)*tau**m)
            self.assertAlmostEqual(nno_normalizer(m, tau)/expected, 1, places=12)
        with self.assertRaises(InvalidInputError):
            nno_normalizer(2, 0)

    def test_score_boundary(self):
        clf = BaselineNnoClassifier(2, gamma=0, tau_fixed=4.0)
        clf.learn_open([0, 0], 0)
        self.assertEqual(clf.baseline_nno_score([2, 0], 0, 4.0), 0)
        self.assertGreater(clf.baseline_nno_score([1, 0], 0, 4.0), 0)
        self.assertLess(clf.baseline_nno_score([3, 0], 0, 4.0), 0)

    def test_frozen_prediction(self):
        clf = BaselineNnoClassifier(2, gamma=0, tau_fixed=4.0)
        clf.learn_open([0, 0], 0)
        clf.learn_open([10, 0], 1)
        clf.freeze()
        self.assertEqual(clf.threshold, 4.0)
        self.assertIs(clf.predict_open([2, 0])[0], UNKNOWN)
        self.assertEqual(clf.predict_open([1.9, 0])[0], 0)
        self.assertEqual(clf.predict_open([9, 0])[0], 1)

    def test_derived_radius(self):
        clf = BaselineNnoClassifier(2, gamma=0)
        for event_x, y in [([0, 0], 0), ([6, 0], 1), ([0.5, 0], 0), ([6.5, 0], 1), ([0.2, 0.1], 0)]:
            clf.learn_open(event_x, y)
        tau, theta = clf.novelty.tau, clf.novelty.theta
        self.assertTrue(0 < tau < 1)
        clf.freeze()
        self.assertAlmostEqual(clf.tau_fixed, -2*theta*math.log(tau))
        restored = BaselineNnoClassifier.from_snapshot(clf.to_snapshot())
        self.assertEqual(restored.tau_fixed, clf.tau_fixed)
        assert_array_almost_equal(restored.classes[1].mu, clf.classes[1].mu)


if __name__ == '__main__':
    unittest.main()
