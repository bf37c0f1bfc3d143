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
import math

import numpy as np
from scipy.special import gammaln

from .exceptions import InvalidInputError, NumericalError
from .learner import UNKNOWN
from .metric import DEFAULT_GAMMA
from .ncm import NcmClassifier

logger = logging.getLogger(__name__)

# theta divides every distance; it is kept strictly positive
THETA_FLOOR = 1e-12


class NoveltyState:
    """Running statistics behind the rejection rule.

    Attributes
    ----------
    theta : float
        Bandwidth, running mean of the summed distances to all class means
    tau : float
        Rejection threshold, running mean of true-class confidences since the
        last novel class
    t : int
        Index of the next bandwidth update (starts at 1)
    t_star : int
        Samples folded into tau since the last novel class
    """
    def __init__(self, theta=1.0, tau=0.0, t=1, t_star=0):
        self.theta = float(theta)
        self.tau = float(tau)
        self.t = int(t)
        self.t_star = int(t_star)

    def update_bandwidth(self, distance_sum):
        self.theta = max((1 - 1.0/self.t)*self.theta + (1.0/self.t)*distance_sum, THETA_FLOOR)
        self.t += 1

    def update_threshold(self, confidence, is_novel_class):
        if is_novel_class:
            self.tau = 0.0
            self.t_star = 0
            return
        self.t_star += 1
        self.tau = (1 - 1.0/self.t_star)*self.tau + (1.0/self.t_star)*confidence

    def copy(self):
        return NoveltyState(self.theta, self.tau, self.t, self.t_star)

    def to_snapshot(self):
        return {"theta": self.theta, "tau": self.tau, "t": self.t, "t_star": self.t_star}

    @classmethod
    def from_snapshot(cls, data):
        return cls(data["theta"], data["tau"], data["t"], data["t_star"])

    def __repr__(self):
        return "NoveltyState(theta=%g, tau=%g, t=%d, t_star=%d)" % (self.theta, self.tau, self.t, self.t_star)


def nno_normalizer(m, tau):
    """Z_tau = Gamma(m/2 + 1) / (pi^(m/2) tau^m), evaluated in log space."""
    if tau <= 0:
        raise InvalidInputError("The fixed threshold tau must be positive, got %r." % tau)
    log_z = gammaln(0.5*m + 1) - 0.5*m*math.log(math.pi) - m*math.log(tau)
    return math.exp(log_z) if log_z < 700 else math.inf


class OnnoClassifier(NcmClassifier):
    """Online nearest non-outlier classifier.

    Extends the online class-mean classifier with an RBF confidence
    C_y = exp(-d_W(x, mu_y) / (2 theta)), an online bandwidth theta and an
    online rejection threshold tau. An instance whose nearest class has
    confidence C <= tau is predicted UNKNOWN.

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
    """
    kind = "nno"

    def __init__(self, d, rank=None, gamma=DEFAULT_GAMMA, gradient_backend="analytic"):
        NcmClassifier.__init__(self, d, rank=rank, gamma=gamma, gradient_backend=gradient_backend)
        self.novelty = NoveltyState()

    @property
    def ncm(self):
        return self

    @property
    def threshold(self):
        return self.novelty.tau

    def _require_class(self, y):
        if y not in self.classes:
            raise InvalidInputError("Class %r is not part of the model." % y)

    def rbf_confidence(self, x, y):
        """Confidence exp(-d_W(x, mu_y) / (2 theta)) in (0, 1]."""
        self._require_class(y)
        return math.exp(-self.metric.distance(x, self.classes[y].mu)/(2*self.novelty.theta))

    def baseline_nno_score(self, x, y, tau_fixed):
        """Fixed-threshold score Z_tau (1 - d_W(x, mu_y)/tau); rejected when <= 0."""
        z = nno_normalizer(self.m, tau_fixed)
        self._require_class(y)
        return z*(1 - self.metric.distance(x, self.classes[y].mu)/tau_fixed)

    def update_bandwidth(self, x):
        """Fold the summed distances of x to all current class means into theta."""
        _, dist = self.class_distances(x)
        self.novelty.update_bandwidth(float(np.sum(dist)))
        return self.novelty

    def update_threshold(self, confidence, is_novel_class):
        if not 0 <= confidence <= 1:
            raise InvalidInputError("Confidence must lie in [0, 1], got %r." % confidence)
        self.novelty.update_threshold(confidence, is_novel_class)
        return self.novelty

    def predict_open(self, x):
        """Nearest class, or UNKNOWN when its confidence does not exceed tau.

        Returns
        -------
        label : int or UNKNOWN
        confidence : float
            Confidence of the nearest class
        """
        ids, dist = self.class_distances(x)
        i = int(np.argmin(dist))
        confidence = math.exp(-dist[i]/(2*self.novelty.theta))
        if confidence <= self.novelty.tau:
            return UNKNOWN, confidence
        return ids[i], confidence

    def learn_open(self, x, y):
        """One online step: bandwidth, threshold, class mean, metric.

        theta and the true-class confidence are computed from the model as it
        stood when the step's prediction was made. A skipped sample leaves the
        whole model untouched.
        """
        try:
            x = self._check_sample(x)
        except NumericalError as e:
            self._skip(str(e), y)
            return
        y = int(y)
        is_novel = y not in self.classes
        distance_sum = None
        confidence = None
        if self.classes:
            _, dist = self.class_distances(x)
            distance_sum = float(np.sum(dist))
            if not is_novel:
                confidence = self.rbf_confidence(x, y)

        skipped = self.skipped
        self.learn(x, y)
        if self.skipped != skipped:
            return

        if distance_sum is not None:
            self.novelty.update_bandwidth(distance_sum)
        if self.learn_threshold:
            self.update_threshold(0.0 if is_novel else confidence, is_novel)
        logger.debug("step y=%d novel=%s theta=%g tau=%g", y, is_novel, self.novelty.theta, self.novelty.tau)

    def to_snapshot(self):
        data = NcmClassifier.to_snapshot(self)
        data["novelty"] = self.novelty.to_snapshot()
        return data

    def _restore(self, data):
        NcmClassifier._restore(self, data)
        self.novelty = NoveltyState.from_snapshot(data["novelty"])


class BaselineNnoClassifier(OnnoClassifier):
    """Nearest non-outlier with the fixed-threshold score Z_tau (1 - d/tau).

    Learns like :obj:`OnnoClassifier` until frozen. Once frozen, an instance
    is UNKNOWN when every class score is <= 0.

    Parameters
    ----------
    tau_fixed : float, optional
        Squared-distance radius of the class balls. Default: derived at
        freeze time as the radius where the RBF confidence equals tau,
        -2 theta log(tau).
    """
    kind = "nno-eq7"

    def __init__(self, d, rank=None, gamma=DEFAULT_GAMMA, gradient_backend="analytic", tau_fixed=None):
        OnnoClassifier.__init__(self, d, rank=rank, gamma=gamma, gradient_backend=gradient_backend)
        self.tau_fixed = tau_fixed

    @property
    def threshold(self):
        if self.frozen and self.tau_fixed is not None:
            return self.tau_fixed
        return self.novelty.tau

    def freeze(self):
        OnnoClassifier.freeze(self)
        if self.tau_fixed is None:
            tau = self.novelty.tau
            if 0 < tau < 1:
                self.tau_fixed = -2*self.novelty.theta*math.log(tau)
            else:
                self.tau_fixed = self.novelty.theta
            logger.info("Fixed NNO radius set to %g", self.tau_fixed)

    def predict_open(self, x):
        if not self.frozen or self.tau_fixed is None:
            return OnnoClassifier.predict_open(self, x)
        ids, dist = self.class_distances(x)
        i = int(np.argmin(dist))
        score = nno_normalizer(self.m, self.tau_fixed)*(1 - dist[i]/self.tau_fixed)
        # Z_tau is positive, so the sign only depends on the distance
        if dist[i] >= self.tau_fixed:
            return UNKNOWN, float(score)
        return ids[i], float(score)

    def to_snapshot(self):
        data = OnnoClassifier.to_snapshot(self)
        data["tau_fixed"] = self.tau_fixed
        return data

    def _restore(self, data):
        OnnoClassifier._restore(self, data)
        self.tau_fixed = data.get("tau_fixed")
