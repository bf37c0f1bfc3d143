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
from scipy.special import logsumexp, softmax

from .casadi_helpers import loglik_and_gradient
from .exceptions import EmptyModelError, InvalidInputError, NumericalError
from .learner import Learner
from .metric import DEFAULT_GAMMA, LowRankMetric, as_vector

logger = logging.getLogger(__name__)


class ClassMeanModel:
    """Running mean of the samples of one class."""
    def __init__(self, class_id, mu, n=1):
        self.class_id = int(class_id)
        self.mu = np.array(mu, dtype=float)
        self.n = int(n)

    def update(self, x):
        """Fold x into the mean; n counts the sample being added."""
        self.n += 1
        self.mu = (1 - 1.0/self.n)*self.mu + (1.0/self.n)*x

    def __repr__(self):
        return "ClassMeanModel(class_id=%d, n=%d)" % (self.class_id, self.n)


class NcmClassifier(Learner):
    """Online nearest class mean classifier with online metric learning.

    Prediction is closed-set: every instance goes to the nearest class mean.

    Parameters
    ----------
    d : int
        Feature dimension
    rank : int, optional
        Rank m of the metric W. Default: min(d, 256)
    gamma : float, optional
        Metric learning rate. Default: 0.01
    gradient_backend : str, optional
        'analytic' or 'casadi'

    Examples
    --------

    >>> clf = NcmClassifier(2)
    >>> clf.learn([0, 0], 1)
    >>> clf.learn([4, 0], 2)
    >>> clf.predict([1, 0])
    1
    """
    kind = "ncm"

    def __init__(self, d, rank=None, gamma=DEFAULT_GAMMA, gradient_backend="analytic"):
        Learner.__init__(self, d, rank=rank, gamma=gamma, gradient_backend=gradient_backend)
        self.classes = {}

    @property
    def class_ids(self):
        """Known class ids in ascending order."""
        return sorted(self.classes)

    def _stacked(self):
        if not self.classes:
            raise EmptyModelError("The model holds no class yet; learn at least one sample first.")
        ids = self.class_ids
        return ids, np.stack([self.classes[c].mu for c in ids])

    def class_distances(self, x):
        """Distances d_W(x, mu_y) to every class, ordered like :attr:`class_ids`."""
        ids, means = self._stacked()
        return ids, self.metric.distances(as_vector(x, self.d), means)

    def class_posteriors(self, x):
        """Softmax over -1/2 d_W(x, mu_y).

        Returns
        -------
        dict
            class_id -> p(y|x)
        """
        ids, dist = self.class_distances(x)
        p = softmax(-0.5*dist)
        return dict(zip(ids, p.tolist()))

    def predict(self, x):
        """Class with the nearest mean; ties go to the smallest class id."""
        ids, dist = self.class_distances(x)
        return ids[int(np.argmin(dist))]

    def predict_open(self, x):
        """Closed-set prediction with its posterior as confidence (never UNKNOWN)."""
        ids, dist = self.class_distances(x)
        p = softmax(-0.5*dist)
        i = int(np.argmin(dist))
        return ids[i], float(p[i])

    def update_mean(self, x, y):
        """Create the class from its first sample or fold x into its mean."""
        x = self._check_sample(x)
        y = int(y)
        if y in self.classes:
            self.classes[y].update(x)
        else:
            self.classes[y] = ClassMeanModel(y, x)

    def gradient(self, x, y):
        """Gradient of log p(y|x) with respect to W.

        .. code-block:: python

            sum_y' (p(y'|x) - [y' == y]) W (mu_y' - x)(mu_y' - x)^T

        Parameters
        ----------
        x : array-like, length d
        y : int
            A known class

        Returns
        -------
        numpy.ndarray, m x d
        """
        x = as_vector(x, self.d)
        ids, means = self._stacked()
        if y not in self.classes:
            raise InvalidInputError("Class %r is not part of the model." % y)
        target = np.array([c == y for c in ids])
        if self.gradient_backend == "casadi":
            return loglik_and_gradient(self.metric.W, x, means, target)[1]
        return prototype_gradient(self.metric, x, means, target)

    ncm_gradient = gradient

    def log_likelihood(self, x, y):
        """log p(y|x) under the current model."""
        ids, dist = self.class_distances(x)
        e = -0.5*dist
        return float(e[ids.index(y)] - logsumexp(e))

    def learn(self, x, y):
        """Incremental mean update followed by one leaky SGD step on W.

        A sample that raises a numerical error is skipped as a whole and logged.
        """
        try:
            x = self._check_sample(x)
        except NumericalError as e:
            self._skip(str(e), y)
            return
        y = int(y)
        previous = self.classes.get(y)
        backup = None if previous is None else (previous.mu.copy(), previous.n)
        self.update_mean(x, y)
        if not self.learn_metric:
            return
        try:
            self._metric_step(self.gradient(x, y))
        except NumericalError as e:
            if backup is None:
                del self.classes[y]
            else:
                previous.mu, previous.n = backup
            self._skip(str(e), y)

    def learn_open(self, x, y):
        self.learn(x, y)

    def to_snapshot(self):
        return {"kind": self.kind,
                "gamma": self.gamma,
                "metric": self.metric.to_snapshot(),
                "learn_metric": self.learn_metric,
                "learn_threshold": self.learn_threshold,
                "classes": [[c, self.classes[c].n, self.classes[c].mu.tolist()] for c in self.class_ids]}

    def _restore(self, data):
        self.metric = LowRankMetric.from_snapshot(data["metric"])
        self.learn_metric = data.get("learn_metric", True)
        self.learn_threshold = data.get("learn_threshold", True)
        self.classes = {}
        for class_id, n, mu in data["classes"]:
            self.classes[int(class_id)] = ClassMeanModel(class_id, mu, n)

    @classmethod
    def from_snapshot(cls, data):
        metric = data["metric"]
        clf = cls(metric["d"], rank=metric["m"], gamma=data["gamma"])
        clf._restore(data)
        return clf


def prototype_gradient(metric, x, centers, target):
    """Closed-form gradient of the prototype softmax log-likelihood.

    Parameters
    ----------
    metric : :obj:`~openworld.metric.LowRankMetric`
    x : numpy.ndarray, length d
    centers : numpy.ndarray, k x d
    target : numpy.ndarray of bool, length k
        Prototypes of the true class

    Returns
    -------
    numpy.ndarray, m x d
        sum_j (p_j - q_j) W (c_j - x)(c_j - x)^T with p the softmax over all
        prototypes and q the softmax restricted to the target prototypes
    """
    diff = centers - x
    P = diff @ metric.W.T
    e = -0.5*np.einsum('ij,ij->i', P, P)
    p = softmax(e)
    q = np.zeros_like(p)
    q[target] = softmax(e[target])
    # W sum_j w_j diff_j diff_j^T = sum_j w_j (W diff_j) diff_j^T
    return ((p - q)[:, None]*P).T @ diff
