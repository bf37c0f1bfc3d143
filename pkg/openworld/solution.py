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

import numpy as np

from .evaluation import REPORT_FIELDS


class RunSolution:
    def __init__(self, evaluator, learner=None):
        """Wrap a finished protocol run to simplify access to its numbers."""
        self.evaluator = evaluator
        self.learner = learner
        self._gist = np.array([[np.nan if v is None else v for v in (getattr(r, f) for f in REPORT_FIELDS)]
                               for r in evaluator.reports], dtype=float).reshape(-1, len(REPORT_FIELDS))

    @property
    def reports(self):
        return self.evaluator.reports

    def _check(self, field):
        if field not in REPORT_FIELDS:
            raise Exception("Unknown report field '%s'. Available: %s." % (field, ", ".join(REPORT_FIELDS)))
        return REPORT_FIELDS.index(field)

    def value(self, field):
        """Value of a report field at the end of the run.

        Parameters
        ----------
        field : str
            Any :obj:`~openworld.evaluation.SegmentReport` field, e.g. 'harmonic'
        """
        self._check(field)
        if not self.reports:
            raise Exception("You forgot to run the protocol: there is no segment report.")
        return getattr(self.reports[-1], field)

    def sample(self, field):
        """Sample a report field at every segment boundary.

        Parameters
        ----------
        field : str
            Any :obj:`~openworld.evaluation.SegmentReport` field

        Returns
        -------
        segments : numpy.ndarray
            Segment indices, same length as values
        values : numpy.ndarray
            Field value per segment; nan where a segment had nothing to average

        Examples
        --------
        Assume a stream and a learner are already defined.

        >>> sol = RunSolution(evaluator)
        >>> ts, hm = sol.sample('harmonic')
        """
        i = self._check(field)
        return self._gist[:, 0].astype(int), self._gist[:, i]

    def window_accuracy(self, n):
        """Closed-set accuracy over the last n known-class predictions."""
        return self.evaluator.window_accuracy(n)

    @property
    def gist(self):
        """All segment reports as one segments x fields array

        Returns
        -------
        2D numpy.ndarray
           Columns follow the field order of :obj:`~openworld.evaluation.SegmentReport`
        """
        return self._gist

    @property
    def stats(self):
        """Counters of the run

        Returns
        -------
        Dictionary
           The information contained is not structured and may change between versions
        """
        stats = {"events": len(self.evaluator.outcomes),
                 "closed_events": self.evaluator.closed.count,
                 "open_events": self.evaluator.open.count}
        if self.learner is not None:
            stats["skipped"] = self.learner.skipped
        return stats

    def summary(self):
        """Final closed, open and harmonic accuracy."""
        return {"closed_acc": self.evaluator.closed.value,
                "open_acc": self.evaluator.open.value,
                "harmonic": self.evaluator.harmonic}
