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

import logging

import numpy as np

from .exceptions import NumericalError
from .metric import LowRankMetric, DEFAULT_GAMMA, as_vector

logger = logging.getLogger(__name__)


class _Unknown:
    """Label predicted for instances rejected by every known class."""
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = object.__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNKNOWN"

    def __reduce__(self):
        return (_Unknown, ())


UNKNOWN = _Unknown()

GRADIENT_BACKENDS = ("analytic", "casadi")


class Learner:
    """
    Base class for online learners driven by the open world template:
    predict, receive the label, update.

    Subclasses implement :meth:`predict_open`, :meth:`learn_open` and
    :attr:`threshold`.

    Parameters
    ----------
    d : int
        Feature dimension
    rank : int, optional
        Rank m of the metric. Default: min(d, 256)
    gamma : float, optional
        Metric learning rate. Default: 0.01
    gradient_backend : str, optional
        'analytic' (closed form) or 'casadi' (algorithmic differentiation)
    """
    kind = None

    def __init__(self, d, rank=None, gamma=DEFAULT_GAMMA, gradient_backend="analytic"):
        if gradient_backend not in GRADIENT_BACKENDS:
            raise Exception("Unknown gradient backend '%s'. Available: %s." % (gradient_backend, ", ".join(GRADIENT_BACKENDS)))
        self.metric = LowRankMetric(d, rank)
        self.gamma = float(gamma)
        self.gradient_backend = gradient_backend
        self.learn_metric = True
        self.learn_threshold = True
        # set by the factory for the fixed-metric counterparts
        self.freeze_after_warmup = False
        self.skipped = 0

    @property
    def d(self):
        return self.metric.d

    @property
    def m(self):
        return self.metric.m

    @property
    def frozen(self):
        return not (self.learn_metric or self.learn_threshold)

    def freeze(self):
        """Stop learning the metric and the rejection threshold.

        Class models keep being updated, so novel classes can still be added.
        """
        self.learn_metric = False
        self.learn_threshold = False

    def _check_sample(self, x):
        x = as_vector(x, self.d)
        if not np.all(np.isfinite(x)):
            raise NumericalError("Sample contains non-finite features.")
        return x

    def _metric_step(self, gradient):
        """Apply the leaky SGD step; the caller's state is untouched on failure."""
        if not self.learn_metric:
            return
        self.metric = self.metric.sgd_step(gradient, self.gamma)

    def _skip(self, reason, y):
        self.skipped += 1
        logger.warning("Skipped sample of class %s: %s", y, reason)

    @property
    def threshold(self):
        """Rejection threshold used by the last prediction (0 when never rejecting)."""
        return 0.0

    def predict(self, x):
        raise NotImplementedError

    def predict_open(self, x):
        raise NotImplementedError

    def learn_open(self, x, y):
        raise NotImplementedError

    def to_snapshot(self):
        raise NotImplementedError
