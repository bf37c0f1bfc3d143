#
#     This file is part of openworld.
#
#     openworld -- online open world recognition
#     Copyright (C) 2024 openworld developers. All rights reserved.
#
#     openworld is free software; you can redistribute it and/or
#     modify it under the terms of the GNU Lesser General Public
#     License as published by the Free Software Foundation; either
#     version 3 of the License, or (at your option) any later version.
#
#     openworld is distributed in the hope that it will be useful,
#     but WITHOUT ANY WARRANTY; without even the implied warranty of
#     MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the GNU
#     Lesser General Public License for more details.
#
#     You should have received a copy of the GNU Lesser General Public
#     License along with openworld; if not, write to the Free Software
#     Foundation, Inc., 51 Franklin Street, Fifth Floor, Boston, MA  02110-1301  USA
#
#

import json
import logging
import math
import os

import numpy as np

from .exceptions import InvalidInputError, ParseError
from .manager import restore_learner

logger = logging.getLogger(__name__)

OWFS_MAGIC = b"OWFS"
OWFS_VERSION = 1
LABEL_WIDTH = 8

HEADER_DTYPE = np.dtype([("magic", "S4"),
                         ("version", "<u4"),
                         ("n", "<u8"),
                         ("d", "<u4"),
                         ("label_width", "<u4")])

STD_FLOOR = 1e-8


def record_dtype(d):
    """One OWFS record: a signed 64-bit label followed by d little-endian float32."""
    return np.dtype([("label", "<i8"), ("x", "<f4", (d,))])


class FeatureSet:
    """Labelled feature vectors, n x d.

    Parameters
    ----------
    features : array-like, n x d
    labels : array-like of int, length n
    dropped : int, optional
        Number of rows discarded at load time for holding non-finite values
    """
    def __init__(self, features, labels, dropped=0):
        features = np.array(features, dtype=float, ndmin=2)
        labels = np.array(labels, dtype=np.int64).reshape(-1)
        if features.ndim != 2:
            raise InvalidInputError("Features must form an n x d matrix, got shape %s." % str(features.shape))
        if labels.shape[0] != features.shape[0]:
            raise InvalidInputError("Got %d labels for %d feature rows." % (labels.shape[0], features.shape[0]))
        features.setflags(write=False)
        labels.setflags(write=False)
        self.features = features
        self.labels = labels
        self.dropped = int(dropped)
        self._class_index = None

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def classes(self):
        """Distinct class ids in ascending order."""
        return sorted(self.class_index)

    @property
    def class_index(self):
        """class_id -> indices of its samples, in file order."""
        if self._class_index is None:
            index = {}
            for c in np.unique(self.labels):
                index[int(c)] = np.flatnonzero(self.labels == c)
            self._class_index = index
        return self._class_index

    def subset(self, indices):
        indices = np.asarray(indices, dtype=int)
        return FeatureSet(self.features[indices], self.labels[indices])

    def __repr__(self):
        return "FeatureSet(n=%d, d=%d, classes=%d)" % (self.n, self.d, len(self.class_index))


def _drop_non_finite(features, labels, path):
    finite = np.all(np.isfinite(features), axis=1)
    dropped = int(np.sum(~finite))
    if dropped:
        logger.warning("Dropped %d row(s) with non-finite features from %s.", dropped, path)
    return features[finite], labels[finite], dropped


def _load_owfs(path, data):
    if len(data) < HEADER_DTYPE.itemsize:
        raise ParseError("File is shorter than the %d-byte OWFS header." % HEADER_DTYPE.itemsize, path=path, offset=len(data))
    header = np.frombuffer(data, dtype=HEADER_DTYPE, count=1)[0]
    if header["magic"] != OWFS_MAGIC:
        raise ParseError("Bad magic bytes %r, expected %r." % (header["magic"], OWFS_MAGIC), path=path, offset=0)
    if header["version"] != OWFS_VERSION:
        raise ParseError("Unsupported OWFS version %d." % header["version"], path=path, offset=4)
    if header["label_width"] != LABEL_WIDTH:
        raise ParseError("Unsupported label width %d, expected %d." % (header["label_width"], LABEL_WIDTH), path=path, offset=20)
    n, d = int(header["n"]), int(header["d"])
    if d < 1:
        raise ParseError("Feature dimension must be positive, got %d." % d, path=path, offset=16)
    rec = record_dtype(d)
    available = (len(data) - HEADER_DTYPE.itemsize)//rec.itemsize
    if available < n:
        raise ParseError("Header announces %d records but only %d are complete." % (n, available),
                         path=path, offset=HEADER_DTYPE.itemsize + available*rec.itemsize)
    expected = HEADER_DTYPE.itemsize + n*rec.itemsize
    if len(data) != expected:
        raise ParseError("Found %d trailing bytes after the last record." % (len(data) - expected), path=path, offset=expected)
    records = np.frombuffer(data, dtype=rec, count=n, offset=HEADER_DTYPE.itemsize)
    return records["x"].astype(float).reshape(n, d), records["label"].astype(np.int64)


def _load_text(path, data):
    features = []
    labels = []
    d = None
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError("File is neither OWFS nor UTF-8 text.", path=path, offset=e.start)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if d is None:
            d = len(parts) - 1
            if d < 1:
                raise ParseError("A row needs a label and at least one feature.", path=path, line=lineno)
        if len(parts) - 1 != d:
            raise ParseError("Row has %d features, expected %d." % (len(parts) - 1, d), path=path, line=lineno)
        try:
            labels.append(int(parts[0]))
            features.append([float(p) for p in parts[1:]])
        except ValueError:
            raise ParseError("Row holds a value that is not a number: %r." % line, path=path, line=lineno)
    if d is None:
        raise ParseError("File holds no data rows.", path=path, line=1)
    return np.array(features, dtype=float).reshape(-1, d), np.array(labels, dtype=np.int64)


def load_features(path):
    """Load a feature file, binary OWFS or comma-separated text.

    The format is detected from the first four bytes. Rows holding NaN or
    Inf are dropped with a warning; their number ends up in
    :attr:`FeatureSet.dropped`.

    Parameters
    ----------
    path : str

    Returns
    -------
    :obj:`FeatureSet`
    """
    if not os.path.isfile(path):
        raise InvalidInputError("Feature file '%s' does not exist." % path)
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] == OWFS_MAGIC:
        features, labels = _load_owfs(path, data)
    else:
        features, labels = _load_text(path, data)
    features, labels, dropped = _drop_non_finite(features, labels, path)
    return FeatureSet(features, labels, dropped=dropped)


def save_features(fs, path, text=None):
    """Write a feature set as OWFS, or as text when the path ends in .txt/.csv.

    OWFS stores float32; values that are not float32-representable are rounded.
    """
    if text is None:
        text = os.path.splitext(path)[1].lower() in (".txt", ".csv")
    if text:
        with open(path, "w") as f:
            for label, x in zip(fs.labels.tolist(), fs.features.tolist()):
                f.write(",".join([str(label)] + [repr(v) for v in x]) + "\n")
        return
    header = np.zeros(1, dtype=HEADER_DTYPE)
    header["magic"] = OWFS_MAGIC
    header["version"] = OWFS_VERSION
    header["n"] = fs.n
    header["d"] = fs.d
    header["label_width"] = LABEL_WIDTH
    records = np.zeros(fs.n, dtype=record_dtype(fs.d))
    records["label"] = fs.labels
    records["x"] = fs.features.astype("<f4")
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(records.tobytes())


class WhitenStats:
    """Per-dimension mean and floored standard deviation."""
    def __init__(self, mean, std):
        mean = np.array(mean, dtype=float).reshape(-1)
        std = np.array(std, dtype=float).reshape(-1)
        if mean.shape != std.shape:
            raise InvalidInputError("Mean has length %d but std has length %d." % (mean.shape[0], std.shape[0]))
        self.mean = mean
        self.std = np.maximum(std, STD_FLOOR)

    @property
    def d(self):
        return self.mean.shape[0]

    @classmethod
    def from_features(cls, features):
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[0] == 0:
            raise InvalidInputError("Whitening statistics need at least one sample.")
        return cls(np.mean(features, axis=0), np.std(features, axis=0))

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.d:
            raise InvalidInputError("Whitening statistics are %d-dimensional, got data of dimension %d." % (self.d, X.shape[-1]))
        return X

    def apply(self, X):
        return (self._check(X) - self.mean)/self.std

    def invert(self, X):
        return self._check(X)*self.std + self.mean

    def to_snapshot(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


def whiten(fs, stats):
    """x' = (x - mean) / std for every row of fs."""
    return FeatureSet(stats.apply(fs.features), fs.labels, dropped=fs.dropped)


def unwhiten(fs, stats):
    return FeatureSet(stats.invert(fs.features), fs.labels, dropped=fs.dropped)


def synth_gaussians(blobs, seed=0):
    """Seeded Gaussian blobs with diagonal covariance.

    Parameters
    ----------
    blobs : list of (mean, variance, class_id, count)
        variance is the covariance diagonal (a scalar is broadcast)
    seed : int

    Returns
    -------
    :obj:`FeatureSet`
        Samples in blob order (streams shuffle them later)
    """
    rng = np.random.default_rng(seed)
    features = []
    labels = []
    for mean, variance, class_id, count in blobs:
        mean = np.array(mean, dtype=float).reshape(-1)
        variance = np.broadcast_to(np.array(variance, dtype=float), mean.shape)
        if count < 1:
            raise InvalidInputError("Blob of class %s needs a positive sample count, got %d." % (class_id, count))
        if np.any(variance < 0):
            raise InvalidInputError("Blob of class %s has a negative variance." % class_id)
        if features and mean.shape[0] != features[0].shape[1]:
            raise InvalidInputError("All blobs must share one dimension.")
        features.append(mean + np.sqrt(variance)*rng.standard_normal((count, mean.shape[0])))
        labels.append(np.full(count, class_id, dtype=np.int64))
    if not features:
        raise InvalidInputError("You forgot to specify at least one blob.")
    return FeatureSet(np.vstack(features), np.concatenate(labels))


def _arc(rng, radius, angle_start, angle_end, thickness, count):
    """Points scattered along a circular arc, Gaussian in the radial direction."""
    angles = rng.uniform(angle_start, angle_end, count)
    radii = radius + thickness*rng.standard_normal(count)
    return np.column_stack([radii*np.cos(angles), radii*np.sin(angles)])


def _separable3(seed):
    d = 10
    blobs = []
    for c in range(3):
        mean = np.zeros(d)
        mean[c] = 6.0
        blobs.append((mean, 1.0, c, 500))
    return synth_gaussians(blobs, seed)


def _xor4(seed):
    return synth_gaussians([((3, 3), 0.25, 0, 500),
                            ((-3, -3), 0.25, 0, 500),
                            ((3, -3), 0.25, 1, 500),
                            ((-3, 3), 0.25, 1, 500)], seed)


def _halo(seed):
    rng = np.random.default_rng(seed)
    count = 500
    known = synth_gaussians([((6, 0), 0.25, 0, count), ((-6, 0), 0.25, 1, count)], seed)
    # one full ring around both blobs: upper half is class 2, lower half class 3
    upper = _arc(rng, 8.0, 0.0, math.pi, 0.5, count)
    lower = _arc(rng, 8.0, math.pi, 2*math.pi, 0.5, count)
    features = np.vstack([known.features, upper, lower])
    labels = np.concatenate([known.labels, np.full(count, 2), np.full(count, 3)])
    return FeatureSet(features, labels)


PRESETS = {"separable3": _separable3, "xor4": _xor4, "halo": _halo}

# scenario settings that fit each preset, keyed by scenario name
PRESET_SCENARIOS = {
    "separable3": {
        "s1": dict(initial_classes=1, batch_classes=1, eval_points=[1, 2, 3]),
        "s2": dict(initial_classes=1, batch_classes=1, eval_points=[1, 2], unknown_test_classes=1, unknown_counts=[0, 1]),
        "custom": dict(segments=3),
    },
    "xor4": {
        "s1": dict(initial_classes=1, batch_classes=1, eval_points=[1, 2]),
        "custom": dict(segments=4),
    },
    "halo": {
        "s3": dict(segments=8, introduction_segments=2, known_per_segment=1, unknown_per_segment=1,
                   images_per_class_per_segment=60, class_lifetime_segments=7, volume_profile="flat",
                   warmup_segments=1, whiten=False, known_classes=[0, 1], unknown_classes=[2, 3]),
        "custom": dict(segments=8, whiten=False, unknown_classes=[2, 3]),
    },
}


def synth_preset(name, seed=0):
    """Named synthetic dataset.

    * separable3: 3 well separated blobs, d = 10, 500 samples per class
    * xor4: 4 blobs in the plane, opposite corners share a class
    * halo: 2 known blobs at (+-6, 0) inside a full unknown ring of radius 8,
      its upper and lower halves being two unknown classes
    """
    if name not in PRESETS:
        raise InvalidInputError("Synthetic preset '%s' not found. Available: %s." % (name, ", ".join("'%s'" % p for p in sorted(PRESETS))))
    return PRESETS[name](seed)


def save_snapshot(learner, path):
    """Write a learner snapshot as JSON; floats keep full precision."""
    with open(path, "w") as f:
        json.dump(learner.to_snapshot(), f)


def load_snapshot(path):
    """Read a snapshot written by :func:`save_snapshot` back into a learner."""
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, path=path, line=e.lineno)
    return restore_learner(data)
