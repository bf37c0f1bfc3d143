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

from .exceptions import InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.01
MAX_DEFAULT_RANK = 256


def default_rank(d):
    """Projected dimension used when none is configured."""
    return min(int(d), MAX_DEFAULT_RANK)


def as_vector(v, d, name="x"):
    """Coerce to a float64 vector of length d, or raise InvalidInputError."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != d:
        raise InvalidInputError("Expected %s to be a vector of length %d, got shape %s." % (name, d, str(v.shape)))
    return v


class LowRankMetric:
    """Low-rank Mahalanobis distance d_W(x, mu) = ||W (x - mu)||^2.

    Instances are never mutated after construction: :meth:`sgd_step`
    returns a new metric. Readers holding a reference keep a consistent view
    while a single writer moves on to the next one.

    Parameters
    ----------
    d : int
        Feature dimension
    m : int, optional
        Projected dimension (rank), m <= d.
        Default: min(d, 256)
    W : array-like, optional
        Explicit m x d matrix. Default: the truncated identity.

    Examples
    --------

    >>> metric = LowRankMetric(3, 2)
    >>> metric.project([3, 4, 5])
    array([3., 4.])
    """
    def __init__(self, d, m=None, W=None):
        if W is not None:
            W = np.array(W, dtype=float, ndmin=2)
            if W.ndim != 2:
                raise InvalidInputError("W must be a matrix, got shape %s." % str(W.shape))
            m_w, d_w = W.shape
            if d is None:
                d = d_w
            if m is None:
                m = m_w
            if (m_w, d_w) != (m, d):
                raise InvalidInputError("W has shape %s, expected (%d, %d)." % (str(W.shape), m, d))
        d = int(d)
        if d < 1:
            raise InvalidInputError("Feature dimension must be positive, got %d." % d)
        m = default_rank(d) if m is None else int(m)
        if not 1 <= m <= d:
            raise InvalidInputError("Rank m must satisfy 1 <= m <= d = %d, got %d." % (d, m))
        if W is None:
            W = np.eye(m, d)
        elif not np.all(np.isfinite(W)):
            raise NumericalError("W contains non-finite entries.")
        self._W = W
        self._W.setflags(write=False)

    @property
    def W(self):
        """Read-only m x d matrix."""
        return self._W

    @property
    def m(self):
        return self._W.shape[0]

    @property
    def d(self):
        return self._W.shape[1]

    @property
    def shape(self):
        return self._W.shape

    def project(self, v):
        """Compute W v.

        Parameters
        ----------
        v : array-like, length d

        Returns
        -------
        numpy.ndarray, length m
        """
        return self._W @ as_vector(v, self.d, "v")

    def project_rows(self, V):
        """Project every row of an n x d matrix; returns n x m."""
        V = np.asarray(V, dtype=float)
        if V.ndim != 2 or V.shape[1] != self.d:
            raise InvalidInputError("Expected rows of length %d, got shape %s." % (self.d, str(V.shape)))
        return V @ self._W.T

    def distance(self, x, mu):
        """Squared low-rank Mahalanobis distance (x-mu)^T W^T W (x-mu).

        Parameters
        ----------
        x : array-like, length d
        mu : array-like, length d

        Returns
        -------
        float
            Non-negative distance
        """
        diff = self._W @ (as_vector(x, self.d, "x") - as_vector(mu, self.d, "mu"))
        return float(diff @ diff)

    def distances(self, x, centers):
        """Distances from x to every row of a k x d matrix of centers."""
        x = as_vector(x, self.d, "x")
        centers = np.asarray(centers, dtype=float)
        if centers.size == 0:
            return np.zeros(0)
        diff = (centers - x) @ self._W.T
        return np.einsum('ij,ij->i', diff, diff)

    def sgd_step(self, gradient, gamma):
        """Leaky update W' = (1 - gamma) W + gamma G.

        Parameters
        ----------
        gradient : array-like, m x d
        gamma : float
            Learning rate, 0 <= gamma < 1 (gamma = 0 keeps W)

        Returns
        -------
        :obj:`LowRankMetric`
            A new metric; self is left untouched.

        Raises
        ------
        NumericalError
            When the gradient or the result holds NaN/Inf.
        """
        G = np.asarray(gradient, dtype=float)
        if G.shape != self.shape:
            raise InvalidInputError("Gradient has shape %s, expected %s." % (str(G.shape), str(self.shape)))
        if not 0 <= gamma < 1:
            raise InvalidInputError("Learning rate must lie in [0, 1), got %r." % gamma)
        if not np.all(np.isfinite(G)):
            raise NumericalError("Gradient contains non-finite entries; metric update rejected.")
        W = (1 - gamma) * self._W + gamma * G
        if not np.all(np.isfinite(W)):
            raise NumericalError("Metric update produced non-finite entries; update rejected.")
        return LowRankMetric(self.d, self.m, W=W)

    @property
    def scale(self):
        """Mean squared singular value ||W||_F^2 / m; 1 for the truncated identity."""
        return float(np.sum(self._W**2))/self.m

    def scaled(self, c):
        """Metric with W replaced by c W (distances scale by c^2)."""
        return LowRankMetric(self.d, self.m, W=c * self._W)

    def to_snapshot(self):
        return {"d": self.d, "m": self.m, "W": self._W.tolist()}

    @classmethod
    def from_snapshot(cls, data):
        return cls(data["d"], data["m"], W=np.array(data["W"], dtype=float).reshape(data["m"], data["d"]))

    def __repr__(self):
        return "LowRankMetric(d=%d, m=%d)" % (self.d, self.m)
