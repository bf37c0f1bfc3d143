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
from dataclasses import dataclass, asdict, fields

import numpy as np
import pandas as pd

from .learner import UNKNOWN

logger = logging.getLogger(__name__)


class OnlineAccuracy:
    """Running mean of hit indicators, A_t = (1 - 1/t) A_{t-1} + (1/t) [hit]."""
    def __init__(self):
        self.value = 0.0
        self.count = 0

    def record(self, hit):
        self.count += 1
        self.value = (1 - 1.0/self.count)*self.value + (1.0/self.count)*(1.0 if hit else 0.0)
        return self

    def __repr__(self):
        return "OnlineAccuracy(value=%g, count=%d)" % (self.value, self.count)


def harmonic_mean(a, b):
    """2ab / (a + b), with hm(0, 0) = 0."""
    if a + b == 0:
        return 0.0
    return 2.0*a*b/(a + b)


def is_hit(prediction, y, known):
    """Known samples need their own label, unknown ones need UNKNOWN."""
    if known:
        return prediction is not UNKNOWN and prediction == y
    return prediction is UNKNOWN


def score_open_world(predictions):
    """Closed-set, open-set and harmonic accuracy of a batch of predictions.

    Parameters
    ----------
    predictions : iterable of (prediction, y, known)

    Returns
    -------
    closed_acc : float
    open_acc : float
    harmonic : float
    """
    closed = OnlineAccuracy()
    open_ = OnlineAccuracy()
    for prediction, y, known in predictions:
        (closed if known else open_).record(is_hit(prediction, y, known))
    return closed.value, open_.value, harmonic_mean(closed.value, open_.value)


@dataclass
class SegmentReport:
    """Online accuracies sampled at the end of a stream segment.

    closed_acc, open_acc and harmonic are cumulative over the whole stream so
    far; the segment_* fields only cover the segment itself. Mean confidences
    and the mean threshold are None for a segment without matching samples.
    """
    segment_index: int
    closed_acc: float
    open_acc: float
    harmonic: float
    mean_closed_confidence: float
    mean_open_confidence: float
    mean_threshold: float
    samples: int
    segment_closed_acc: float
    segment_open_acc: float

    def as_dict(self):
        return asdict(self)


REPORT_FIELDS = [f.name for f in fields(SegmentReport)]

TABLE_COLUMNS = [("segment", "segment_index"),
                 ("closed", "closed_acc"),
                 ("open", "open_acc"),
                 ("harmonic", "harmonic"),
                 ("cc", "mean_closed_confidence"),
                 ("oc", "mean_open_confidence"),
                 ("thr", "mean_threshold")]


def _mean(values):
    return float(np.mean(values)) if values else None


class OpenWorldEvaluator:
    """Accumulates the outcome of every prediction of a protocol run.

    Confidences and thresholds are those of the prediction, taken before the
    learner saw the sample's label.
    """
    def __init__(self):
        self.closed = OnlineAccuracy()
        self.open = OnlineAccuracy()
        self.outcomes = []
        self.reports = []
        self._reset_segment()

    def _reset_segment(self):
        self._segment_closed = OnlineAccuracy()
        self._segment_open = OnlineAccuracy()
        self._closed_confidences = []
        self._open_confidences = []
        self._thresholds = []

    def record(self, event, prediction, confidence, threshold):
        hit = is_hit(prediction, event.y, event.known)
        if event.known:
            self.closed.record(hit)
            self._segment_closed.record(hit)
            self._closed_confidences.append(confidence)
        else:
            self.open.record(hit)
            self._segment_open.record(hit)
            self._open_confidences.append(confidence)
        self._thresholds.append(threshold)
        self.outcomes.append((prediction, event.y, event.known))
        return hit

    @property
    def harmonic(self):
        return harmonic_mean(self.closed.value, self.open.value)

    def close_segment(self, segment_index):
        """Freeze the running values into a :obj:`SegmentReport` and start a new segment."""
        report = SegmentReport(segment_index=int(segment_index),
                               closed_acc=self.closed.value,
                               open_acc=self.open.value,
                               harmonic=self.harmonic,
                               mean_closed_confidence=_mean(self._closed_confidences),
                               mean_open_confidence=_mean(self._open_confidences),
                               mean_threshold=_mean(self._thresholds),
                               samples=self._segment_closed.count + self._segment_open.count,
                               segment_closed_acc=self._segment_closed.value,
                               segment_open_acc=self._segment_open.value)
        self.reports.append(report)
        self._reset_segment()
        logger.info("segment %d: closed=%.4f open=%.4f harmonic=%.4f samples=%d",
                    report.segment_index, report.closed_acc, report.open_acc, report.harmonic, report.samples)
        return report

    def window_accuracy(self, n):
        """Closed-set accuracy over the last n known-class predictions."""
        known = [o for o in self.outcomes if o[2]]
        window = known[-n:] if n > 0 else []
        if not window:
            return 0.0
        return sum(is_hit(*o) for o in window)/len(window)


def write_reports_jsonl(reports, path):
    """One JSON object per line, fields in declaration order."""
    with open(path, "w") as f:
        for report in reports:
            f.write(json.dumps(report.as_dict()) + "\n")


def read_reports_jsonl(path):
    with open(path) as f:
        return [SegmentReport(**json.loads(line)) for line in f if line.strip()]


def write_reports_table(reports, path):
    """Plot-ready delimited table: segment, closed, open, harmonic, cc, oc, thr.

    Undefined values are left empty.
    """
    table = pd.DataFrame([[getattr(r, attr) for _, attr in TABLE_COLUMNS] for r in reports],
                         columns=[c for c, _ in TABLE_COLUMNS])
    table.to_csv(path, index=False)


def write_rows(rows, path):
    """Delimited table of dict rows, columns in the order of the first row."""
    if not rows:
        open(path, "w").close()
        return
    pd.DataFrame(rows, columns=list(rows[0])).to_csv(path, index=False)
