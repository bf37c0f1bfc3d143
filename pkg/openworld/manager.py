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

from .nbc import NbcClassifier
from .ncm import NcmClassifier
from .nno import BaselineNnoClassifier, OnnoClassifier

# name -> (class, settings that define the variant, freeze after warm-up)
LEARNERS = {
    "oncm": (NcmClassifier, {}, False),
    "onno": (OnnoClassifier, {}, False),
    "onbc": (NbcClassifier, {}, False),
    "ncm-fixed": (NcmClassifier, {}, True),
    "nno-fixed": (OnnoClassifier, {}, True),
    "nbc-fixed": (NbcClassifier, {}, True),
    "nbc-l2": (NbcClassifier, {"gamma": 0.0, "rank": "d"}, False),
    "nno-eq7": (BaselineNnoClassifier, {}, True),
}

SNAPSHOT_KINDS = {cls.kind: cls for cls, _, _ in LEARNERS.values()}


def make_learner(name, d, **kwargs):
    """Instantiate a learner by name.

    Parameters
    ----------
    name : str
        One of :data:`LEARNERS`
    d : int
        Feature dimension
    kwargs :
        Constructor arguments (gamma, rank, gradient_backend, ...). Settings
        that define a variant (e.g. gamma = 0 for 'nbc-l2') take precedence.

    Examples
    --------

    >>> learner = make_learner('onno', 4, gamma=0.05)
    """
    if name not in LEARNERS:
        available = ",".join(["'%s'" % e for e in LEARNERS])
        raise Exception("learner '%s' not found. Available: %s." % (name, available))
    cls, settings, fixed = LEARNERS[name]
    kwargs = {k: v for k, v in kwargs.items() if v is not None}
    for key, value in settings.items():
        kwargs[key] = d if value == "d" else value
    learner = cls(d, **kwargs)
    learner.freeze_after_warmup = fixed
    return learner


def restore_learner(data):
    """Rebuild a learner from the dictionary produced by its ``to_snapshot``."""
    kind = data.get("kind")
    if kind not in SNAPSHOT_KINDS:
        available = ",".join(["'%s'" % e for e in SNAPSHOT_KINDS])
        raise Exception("snapshot kind '%s' not recognised. Available: %s." % (kind, available))
    return SNAPSHOT_KINDS[kind].from_snapshot(data)
