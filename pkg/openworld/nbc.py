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

import copy
import logging
import math

import numpy as np
from numpy import inf
from scipy.special import logsumexp, softmax

from .casadi_helpers import loglik_and_gradient
from .exceptions import EmptyModelError, NumericalError
from .learner import Learner, UNKNOWN
from .metric import DEFAULT_GAMMA, LowRankMetric, as_vector
from .ncm import prototype_gradient
from .nno import NoveltyState

logger = logging.getLogger(__name__)

# keeps ball units defined for a vanishing metric
SCALE_FLOOR = 1e-12


def local_kernel(distance, radius):
    """exp(-d / (2 eps)); a zero radius only accepts its own center."""
    if radius == inf:
        return 1.0
    if radius <= 0:
        return 1.0 if distance <= 0 else 0.0
    return math.exp(-distance/(2*radius))


class Ball:
    """Local prototype: center, shrinking radius and a class histogram.

    Radii live in ball units: squared distances d_W divided by the scale of
    W (see :meth:`NbcClassifier.radius_distances`).
    A radius of inf marks the very first ball before a second sample has
    fixed its size.
    """
    def __init__(self, center, radius, class_id, index=0):
        self.center = np.array(center, dtype=float)
        self.radius = float(radius)
        self.radius_initial = float(radius)
        self.class_counts = {int(class_id): 1}
        self.total = 1
        self.errors = 0
        self.index = index

    def probability(self, y):
        """Local class probability n_b(y) / n_b."""
        return self.class_counts.get(y, 0)/self.total

    def probabilities(self):
        return {c: n/self.total for c, n in self.class_counts.items()}

    @property
    def majority(self):
        """Most frequent class; ties go to the smallest class id."""
        best = max(self.class_counts.values())
        return min(c for c, n in self.class_counts.items() if n == best)

    def set_initial_radius(self, radius):
        self.radius = self.radius_initial = float(radius)

    def absorb(self, x, y, d_hat):
        """Add a sample that fell inside the ball.

        The ball is judged on its counts before the sample: a correct
        majority moves the center, a mistake shrinks the radius.

        Returns
        -------
        bool
            True when the ball's prediction was a mistake
        """
        predicted = self.majority
        self.class_counts[y] = self.class_counts.get(y, 0) + 1
        self.total += 1
        if predicted == y:
            self.center = (1 - 1.0/self.total)*self.center + (1.0/self.total)*x
            return False
        self.errors += 1
        self.radius = self.radius_initial*self.errors**(-1.0/(2 + d_hat))
        return True

    def to_snapshot(self):
        finite = self.radius_initial != inf
        return {"center": self.center.tolist(),
                "radius": self.radius if finite else None,
                "radius_initial": self.radius_initial if finite else None,
                "errors": self.errors,
                "class_counts": sorted(self.class_counts.items())}

    @classmethod
    def from_snapshot(cls, data, index=0):
        ball = cls(data["center"], inf, 0, index=index)
        if data["radius_initial"] is not None:
            ball.radius_initial = data["radius_initial"]
            ball.radius = data["radius"]
        ball.errors = data["errors"]
        ball.class_counts = {int(c): int(n) for c, n in data["class_counts"]}
        ball.total = sum(ball.class_counts.values())
        return ball

    def __repr__(self):
        return "Ball(index=%d, radius=%g, total=%d, errors=%d)" % (self.index, self.radius, self.total, self.errors)


class NbcClassifier(Learner):
    """Online nearest ball classifier with online metric learning.

    A growing set of balls covers the observed samples. Prediction uses the
    local class probability of the nearest ball; instances whose local
    confidence falls below a Hoeffding-widened threshold are UNKNOWN.

    Parameters
    ----------
    d : int
        Feature dimension
    rank : int, optional
        Rank m of the metric W. Default: min(d, 256)
    gamma : float, optional
        Metric learning rate. Default: 0.01. Use 0 (and rank=d) for the
        plain l2 ball classifier.
    gradient_backend : str, optional
        'analytic' or 'casadi'
    d_hat : float, optional
        Intrinsic dimension in the radius shrink exponent. Default: m
    """
    kind = "nbc"

    def __init__(self, d, rank=None, gamma=DEFAULT_GAMMA, gradient_backend="analytic", d_hat=None):
        Learner.__init__(self, d, rank=rank, gamma=gamma, gradient_backend=gradient_backend)
        self.d_hat = self.m if d_hat is None else d_hat
        self.balls = []
        self.novelty = NoveltyState()
        self.seen = set()

    def _centers(self):
        if not self.balls:
            raise EmptyModelError("The model holds no ball yet; learn at least one sample first.")
        return np.stack([b.center for b in self.balls])

    def ball_distances(self, x):
        """Distances d_W(x, c_b) to every ball center."""
        return self.metric.distances(as_vector(x, self.d), self._centers())

    def _ball_units(self, distance):
        return distance/max(self.metric.scale, SCALE_FLOOR)

    def radius_distances(self, x):
        """Distances to every ball center in ball units, d_W / scale(W).

        Radii are stored in these units and never recomputed. Rescaling W
        uniformly therefore leaves every inside/outside decision and every
        local confidence unchanged; only the shape of W moves the balls.
        """
        return self._ball_units(self.ball_distances(x))

    def nearest_ball(self, x):
        """Ball whose center is nearest under d_W; ties go to the oldest ball.

        Returns
        -------
        ball : :obj:`Ball`
        distance : float
            In ball units
        """
        dist = self.radius_distances(x)
        i = int(np.argmin(dist))
        return self.balls[i], float(dist[i])

    def local_predict(self, x):
        return self.nearest_ball(x)[0].majority

    predict = local_predict

    def local_confidence(self, x, y, ball=None, distance=None):
        """p_b(y) exp(-d / (2 eps_b)) for the nearest ball b, d in ball units."""
        if ball is None:
            ball, distance = self.nearest_ball(x)
        return ball.probability(y)*local_kernel(distance, ball.radius)

    def hoeffding_threshold(self):
        """tau + sqrt(log(1/delta) / (2 t*)) with delta = 1/(t* C).

        Returns inf while no sample supports tau (t* = 0).
        """
        t_star = self.novelty.t_star
        if t_star == 0:
            return inf
        C = max(len(self.seen), 1)
        return self.novelty.tau + math.sqrt(math.log(t_star*C)/(2*t_star))

    @property
    def threshold(self):
        bound = self.hoeffding_threshold()
        return self.novelty.tau if bound == inf else bound

    def predict_open(self, x):
        """Majority of the nearest ball, or UNKNOWN when its confidence is below the bound.

        Returns
        -------
        label : int or UNKNOWN
        confidence : float
        """
        ball, distance = self.nearest_ball(x)
        label = ball.majority
        confidence = self.local_confidence(x, label, ball, distance)
        bound = self.hoeffding_threshold()
        if bound != inf and confidence < bound:
            return UNKNOWN, confidence
        return label, confidence

    def train_step(self, x, y):
        """Create a ball for x or let the nearest ball absorb it.

        Returns
        -------
        ball : :obj:`Ball`
            The ball that was created or that absorbed x
        created : bool
        """
        x = self._check_sample(x)
        y = int(y)
        if not self.balls:
            ball = Ball(x, inf, y, index=0)
            self.balls.append(ball)
            return ball, True
        ball, distance = self.nearest_ball(x)
        if ball.radius_initial == inf:
            ball.set_initial_radius(distance)
        if distance > ball.radius:
            new = Ball(x, distance, y, index=len(self.balls))
            self.balls.append(new)
            return new, True
        ball.absorb(x, y, self.d_hat)
        return ball, False

    def update_threshold_local(self, x, y, b_star, inside, is_novel_class, distance=None):
        """Fold the local confidence of an inside sample into tau.

        Samples that create a ball leave tau untouched.
        """
        if is_novel_class:
            self.novelty.update_threshold(0.0, True)
        elif inside:
            if distance is None:
                distance = self._ball_units(self.metric.distance(x, b_star.center))
            self.novelty.update_threshold(self.local_confidence(x, y, b_star, distance), False)
        return self.novelty

    def ball_labels(self):
        return np.array([b.majority for b in self.balls])

    def nbc_posteriors(self, x):
        """Class probabilities summing exp(-1/2 d_W) over the balls of each class."""
        dist = self.ball_distances(x)
        p = softmax(-0.5*dist)
        posteriors = {}
        for label, pb in zip(self.ball_labels().tolist(), p.tolist()):
            posteriors[label] = posteriors.get(label, 0.0) + pb
        return dict(sorted(posteriors.items()))

    def gradient(self, x, y):
        """Gradient of log p_NBC(y|x) with respect to W, or None when constant.

        The likelihood carries no signal when every ball votes for the same
        class or when y owns no ball.
        """
        x = as_vector(x, self.d)
        labels = self.ball_labels()
        target = labels == y
        if not np.any(target) or np.all(target):
            return None
        centers = self._centers()
        if self.gradient_backend == "casadi":
            return loglik_and_gradient(self.metric.W, x, centers, target)[1]
        return prototype_gradient(self.metric, x, centers, target)

    def log_likelihood(self, x, y):
        dist = self.ball_distances(x)
        e = -0.5*dist
        target = self.ball_labels() == y
        if not np.any(target):
            return -inf
        return float(logsumexp(e[target]) - logsumexp(e))

    def _step_state(self, b_star):
        # a step touches at most the nearest ball and appends at most one
        touched = None if b_star is None else copy.deepcopy(b_star)
        return len(self.balls), touched, self.novelty.copy(), set(self.seen)

    def _undo_step(self, state):
        n_balls, touched, novelty, seen = state
        del self.balls[n_balls:]
        if touched is not None:
            self.balls[touched.index] = touched
        self.novelty = novelty
        self.seen = seen

    def learn_open(self, x, y):
        """One online step: threshold, ball set, then a single SGD step on W.

        The step is all or nothing: when the metric step is rejected the ball
        set, tau, t* and the seen classes are restored and the sample is
        skipped.
        """
        try:
            x = self._check_sample(x)
        except NumericalError as e:
            self._skip(str(e), y)
            return
        y = int(y)
        is_novel = y not in self.seen
        b_star, distance, inside = None, None, False
        if self.balls:
            b_star, distance = self.nearest_ball(x)
        state = self._step_state(b_star)
        if b_star is not None:
            # the second sample ever sizes the first ball before it is judged
            if b_star.radius_initial == inf:
                b_star.set_initial_radius(distance)
            inside = distance <= b_star.radius
        if self.learn_threshold:
            self.update_threshold_local(x, y, b_star, inside, is_novel, distance)

        self.train_step(x, y)
        self.seen.add(y)
        self.novelty.t += 1

        if not self.learn_metric or self.gamma == 0:
            return
        try:
            G = self.gradient(x, y)
            if G is not None:
                self._metric_step(G)
        except NumericalError as e:
            self._undo_step(state)
            self._skip(str(e), y)

    def learn(self, x, y):
        self.learn_open(x, y)

    def to_snapshot(self):
        return {"kind": self.kind,
                "gamma": self.gamma,
                "d_hat": self.d_hat,
                "metric": self.metric.to_snapshot(),
                "learn_metric": self.learn_metric,
                "learn_threshold": self.learn_threshold,
                "novelty": self.novelty.to_snapshot(),
                "seen": sorted(self.seen),
                "balls": [b.to_snapshot() for b in self.balls]}

    def _restore(self, data):
        self.metric = LowRankMetric.from_snapshot(data["metric"])
        self.learn_metric = data.get("learn_metric", True)
        self.learn_threshold = data.get("learn_threshold", True)
        self.novelty = NoveltyState.from_snapshot(data["novelty"])
        self.seen = set(data["seen"])
        self.balls = [Ball.from_snapshot(b, index=i) for i, b in enumerate(data["balls"])]

    @classmethod
    def from_snapshot(cls, data):
        metric = data["metric"]
        clf = cls(metric["d"], rank=metric["m"], gamma=data["gamma"], d_hat=data["d_hat"])
        clf._restore(data)
        return clf
