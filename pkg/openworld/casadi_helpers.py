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

import casadi as cs
import numpy as np
from functools import lru_cache

from .exceptions import InvalidInputError


def DM2numpy(dm, shape):
    """Convert a casadi DM to a numpy array of the given shape.

    casadi stores matrices column-major; shape is restored in that order.
    """
    return np.array(dm, dtype=float).reshape(shape, order='F')


@lru_cache(maxsize=64)
def loglik_function(m, d, k):
    """Symbolic log-likelihood of a softmax over k prototypes.

    .. code-block:: python

        log p = log sum_j mask_j exp(-1/2 d_W(x, c_j)) - log sum_j exp(-1/2 d_W(x, c_j))

    With one prototype per class and a one-hot mask this is the class-mean
    model; with balls as prototypes and the mask selecting the balls assigned
    to the target class it is the ball model.

    Parameters
    ----------
    m : int
        Rank of W
    d : int
        Feature dimension
    k : int
        Number of prototypes

    Returns
    -------
    :obj:`casadi.Function`
        (w, x, C, mask) -> (loglik, grad) with w = vec(W) column-major,
        C a d x k matrix of prototypes, grad = d loglik / d vec(W)^T
    """
    w = cs.MX.sym('w', m*d)
    W = cs.reshape(w, m, d)
    x = cs.MX.sym('x', d)
    C = cs.MX.sym('C', d, k)
    mask = cs.MX.sym('mask', k)

    P = cs.mtimes(W, C - cs.repmat(x, 1, k))
    e = -0.5*cs.sum1(P**2).T
    shift = cs.mmax(e)
    e = e - shift
    loglik = cs.log(cs.dot(mask, cs.exp(e))) - cs.log(cs.sum1(cs.exp(e)))
    grad = cs.jacobian(loglik, w)
    return cs.Function('loglik', [w, x, C, mask], [loglik, grad],
                       ['w', 'x', 'C', 'mask'], ['loglik', 'grad'])


def loglik_and_gradient(W, x, centers, mask):
    """Evaluate the prototype log-likelihood and its gradient with respect to W.

    Parameters
    ----------
    W : numpy.ndarray, m x d
    x : numpy.ndarray, length d
    centers : numpy.ndarray, k x d
    mask : array-like of bool, length k
        Prototypes that belong to the target class; at least one must be set.

    Returns
    -------
    loglik : float
    grad : numpy.ndarray, m x d
    """
    W = np.asarray(W, dtype=float)
    centers = np.asarray(centers, dtype=float)
    mask = np.asarray(mask, dtype=float)
    m, d = W.shape
    if centers.ndim != 2 or centers.shape[1] != d or centers.shape[0] != mask.shape[0]:
        raise InvalidInputError("Got %s prototypes for a mask of length %d in dimension %d." % (str(centers.shape), mask.shape[0], d))
    if not np.any(mask > 0):
        raise InvalidInputError("The target class owns no prototype; its log-likelihood is -inf.")
    k = centers.shape[0]
    f = loglik_function(m, d, k)
    loglik, grad = f(W.ravel(order='F'), np.asarray(x, dtype=float), centers.T, mask)
    return float(loglik), DM2numpy(grad, (m, d))
