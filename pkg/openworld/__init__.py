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

from .exceptions import OpenWorldError, InvalidInputError, EmptyModelError, NumericalError, ConfigError, ParseError
from .metric import LowRankMetric
from .learner import Learner, UNKNOWN
from .ncm import NcmClassifier, ClassMeanModel
from .nno import OnnoClassifier, BaselineNnoClassifier, NoveltyState
from .nbc import NbcClassifier, Ball
from .evaluation import OnlineAccuracy, OpenWorldEvaluator, SegmentReport, harmonic_mean
from .stream import ScenarioConfig, StreamEvent, Stream, run_protocol, run_incremental, run_open_world
from .dataio import FeatureSet, load_features, save_features, synth_preset, load_snapshot, save_snapshot
from .manager import make_learner
from .solution import RunSolution
