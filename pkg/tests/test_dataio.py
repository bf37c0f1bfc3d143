import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_array_almost_equal, assert_array_equal

from openworld.dataio import (FeatureSet, HEADER_DTYPE, WhitenStats, load_features, load_snapshot, save_features,
                              save_snapshot, synth_preset, unwhiten, whiten)
from openworld.exceptions import InvalidInputError, ParseError
from openworld.manager import make_learner
from problems import trained_onbc, two_blob_events


class FeatureFileTests(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def write(self, name, content):
        mode = "wb" if isinstance(content, bytes) else "w"
        with open(self.path(name), mode) as f:
            f.write(content)
        return self.path(name)

    def test_owfs(self):
        fs = FeatureSet([[0.5, -1.25], [3.0, 4.0], [1e-3, 7.0]], [2, -1, 2])
        save_features(fs, self.path("a.owfs"))
        self.assertEqual(os.path.getsize(self.path("a.owfs")), HEADER_DTYPE.itemsize + 3*(8 + 2*4))
        loaded = load_features(self.path("a.owfs"))
        assert_array_equal(loaded.labels, fs.labels)
        assert_array_almost_equal(loaded.features, fs.features.astype(np.float32))
        self.assertEqual(loaded.classes, [-1, 2])

    def test_owfs_errors(self):
        fs = FeatureSet([[1.0, 2.0], [3.0, 4.0]], [0, 1])
        save_features(fs, self.path("a.owfs"))
        with open(self.path("a.owfs"), "rb") as f:
            data = f.read()
        with self.assertRaises(ParseError) as cm:
            load_features(self.write("short.owfs", data[:HEADER_DTYPE.itemsize + 20]))
        self.assertEqual(cm.exception.offset, HEADER_DTYPE.itemsize + 16)
        with self.assertRaises(ParseError) as cm:
            load_features(self.write("long.owfs", data + b"\x00"))
        self.assertEqual(cm.exception.offset, len(data))
        with self.assertRaises(ParseError):
            load_features(self.write("header.owfs", data[:10]))
        version = bytearray(data)
        version[4] = 9
        with self.assertRaises(ParseError) as cm:
            load_features(self.write("version.owfs", bytes(version)))
        self.assertEqual(cm.exception.offset, 4)

    def test_text(self):
        path = self.write("a.csv", "# label, features\n1, 0.5, 2\n\n3, -1, 4e-2\n")
        fs = load_features(path)
        assert_array_equal(fs.labels, [1, 3])
        assert_array_almost_equal(fs.features, [[0.5, 2], [-1, 0.04]])
        save_features(fs, self.path("b.txt"))
        assert_array_equal(load_features(self.path("b.txt")).features, fs.features)

    def test_text_errors(self):
        with self.assertRaises(ParseError) as cm:
            load_features(self.write("a.csv", "1,2,3\n1,2\n"))
        self.assertEqual(cm.exception.line, 2)
        with self.assertRaises(ParseError) as cm:
            load_features(self.write("b.csv", "1,2,3\nx,2,3\n"))
        self.assertEqual(cm.exception.line, 2)
        self.assertIn("line 2", str(cm.exception))
        with self.assertRaises(ParseError):
            load_features(self.write("c.csv", "# nothing\n"))

    def test_undecodable_bytes(self):
        path = self.write("d.csv", b"1,2,3\n\xff\xfe,1\n")
        with self.assertRaises(ParseError) as cm:
            load_features(path)
        self.assertEqual(cm.exception.offset, 6)
        self.assertEqual(cm.exception.path, path)
        with self.assertRaises(ParseError) as cm:
            load_features(self.write("e.bin", b"\xff"))
        self.assertEqual(cm.exception.offset, 0)

    def test_missing_file(self):
        with self.assertRaises(InvalidInputError):
            load_features(self.path("nope.owfs"))

    def test_non_finite_rows_dropped(self):
        fs = load_features(self.write("a.csv", "0,1,2\n1,nan,2\n1,3,inf\n1,3,4\n"))
        self.assertEqual(fs.n, 2)
        self.assertEqual(fs.dropped, 2)
        assert_array_equal(fs.labels, [0, 1])

    def test_snapshot(self):
        clf = trained_onbc(gamma=0.05)
        save_snapshot(clf, self.path("snap.json"))
        restored = load_snapshot(self.path("snap.json"))
        self.assertEqual(restored.kind, "nbc")
        assert_array_equal(restored.metric.W, clf.metric.W)
        for event in two_blob_events(n=6, seed=3):
            self.assertEqual(restored.predict_open(event.x), clf.predict_open(event.x))
        with self.assertRaises(ParseError):
            load_snapshot(self.write("bad.json", "{"))
        with self.assertRaises(Exception):
            load_snapshot(self.write("kind.json", '{"kind": "svm"}'))

    def test_snapshot_every_learner(self):
        for name in ("oncm", "onno", "onbc", "nno-eq7"):
            clf = make_learner(name, 2)
            for event in two_blob_events(n=10):
                clf.learn_open(event.x, event.y)
            save_snapshot(clf, self.path("%s.json" % name))
            restored = load_snapshot(self.path("%s.json" % name))
            self.assertEqual(type(restored), type(clf))
            self.assertEqual(restored.predict([4.5, 0]), clf.predict([4.5, 0]))


class WhiteningTests(unittest.TestCase):

    def test_whiten(self):
        rng = np.random.default_rng(0)
        fs = FeatureSet(3 + 2*rng.standard_normal((200, 3)), np.zeros(200))
        stats = WhitenStats.from_features(fs.features)
        white = whiten(fs, stats)
        assert_array_almost_equal(white.features.mean(axis=0), np.zeros(3))
        assert_array_almost_equal(white.features.std(axis=0), np.ones(3))
        assert_array_almost_equal(unwhiten(white, stats).features, fs.features)

    def test_constant_dimension(self):
        stats = WhitenStats.from_features(np.array([[1.0, 5.0], [2.0, 5.0]]))
        self.assertTrue(np.all(np.isfinite(stats.apply([[1.5, 5.0]]))))
        with self.assertRaises(InvalidInputError):
            stats.apply([[1.0, 2.0, 3.0]])


class PresetTests(unittest.TestCase):

    def test_shapes(self):
        fs = synth_preset("separable3")
        self.assertEqual((fs.n, fs.d, fs.classes), (1500, 10, [0, 1, 2]))
        fs = synth_preset("xor4")
        self.assertEqual((fs.n, fs.d, fs.classes), (2000, 2, [0, 1]))
        fs = synth_preset("halo")
        self.assertEqual((fs.n, fs.d, fs.classes), (2000, 2, [0, 1, 2, 3]))
        radii = np.linalg.norm(fs.features[fs.labels >= 2], axis=1)
        self.assertTrue(6 < np.median(radii) < 10)
        upper, lower = fs.features[fs.labels == 2], fs.features[fs.labels == 3]
        self.assertTrue(np.all(upper[:, 1] >= 0) and np.all(lower[:, 1] <= 0))
        # the ring passes on both sides of both blobs
        for half in (upper, lower):
            self.assertLess(half[:, 0].min(), -6)
            self.assertGreater(half[:, 0].max(), 6)
        assert_array_almost_equal(fs.features[fs.labels == 0].mean(axis=0), [6, 0], decimal=1)

    def test_seeded(self):
        assert_array_equal(synth_preset("halo", seed=4).features, synth_preset("halo", seed=4).features)
        self.assertFalse(np.array_equal(synth_preset("xor4", seed=1).features, synth_preset("xor4", seed=2).features))
        with self.assertRaises(InvalidInputError):
            synth_preset("moons")


if __name__ == '__main__':
    unittest.main()
