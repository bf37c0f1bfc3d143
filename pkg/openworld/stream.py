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
from dataclasses import dataclass, field, fields, asdict, replace

import numpy as np

from .dataio import PRESET_SCENARIOS, WhitenStats
from .evaluation import OpenWorldEvaluator, is_hit, score_open_world
from .exceptions import ConfigError, EmptyModelError, OpenWorldError, ParseError
from .learner import UNKNOWN

logger = logging.getLogger(__name__)

SCENARIOS = ("s1", "s2", "s3", "custom")
VOLUME_PROFILES = ("flat", "peaked")


@dataclass
class ScenarioConfig:
    """Every knob of the evaluation protocols.

    Defaults reproduce the large-scale stream scenario; use
    :meth:`for_scenario` for the other presets.
    """
    scenario: str = "s3"
    seed: int = 0
    initial_classes: int = 20
    batch_classes: int = 10
    eval_points: list = field(default_factory=lambda: [50, 100, 200, 500, 1000])
    segments: int = 40
    introduction_segments: int = 20
    known_per_segment: int = 5
    unknown_per_segment: int = 5
    images_per_class_per_segment: int = 60
    class_lifetime_segments: int = 20
    volume_profile: str = "peaked"
    test_fraction: float = 0.2
    unknown_test_classes: int = 50
    unknown_counts: list = field(default_factory=lambda: [0, 10, 20, 30, 40, 50])
    known_classes: list = None
    unknown_classes: list = None
    train_unknown: bool = False
    warmup_segments: int = 5
    whiten: bool = True

    @classmethod
    def for_scenario(cls, name, preset=None, **overrides):
        """Preset for 's1' (incremental), 's2' (open world), 's3' (stream) or 'custom'.

        Parameters
        ----------
        name : str
        preset : str, optional
            Synthetic dataset the run uses; its scenario settings are applied
        overrides :
            Field values applied last
        """
        if name not in SCENARIOS:
            raise ConfigError("Unknown scenario '%s'. Available: %s." % (name, ", ".join(SCENARIOS)))
        presets = {
            "s1": dict(initial_classes=20, batch_classes=10, eval_points=[50, 100, 200, 500, 1000]),
            "s2": dict(initial_classes=50, batch_classes=50, eval_points=[50, 100, 150, 200, 250, 300]),
            "s3": dict(),
            "custom": dict(segments=10),
        }
        config = cls(scenario=name, **presets[name])
        settings = dict(PRESET_SCENARIOS.get(preset, {}).get(name, {}))
        settings.update(overrides)
        return replace(config, **settings) if settings else config

    @classmethod
    def from_dict(cls, values, base=None):
        """Overlay a mapping of field values on base (default: the s3 preset)."""
        names = {f.name for f in fields(cls)}
        unknown = sorted(k for k in values if k not in names)
        if unknown:
            raise ConfigError(["Unknown configuration key '%s'." % k for k in unknown])
        return replace(base if base is not None else cls(), **values)

    @classmethod
    def from_file(cls, path, base=None):
        """Read a flat ``key = value`` file; ``#`` starts a comment, lists are comma-separated."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        unknown = []
        with open(path) as f:
            for lineno, line in enumerate(f, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ParseError("Expected 'key = value', got %r." % line, path=path, line=lineno)
                key, text = [p.strip() for p in line.split("=", 1)]
                if key not in types:
                    unknown.append("Unknown configuration key '%s' (line %d)." % (key, lineno))
                    continue
                try:
                    values[key] = _convert(types[key], text)
                except ValueError:
                    raise ParseError("Cannot read %r as %s for '%s'." % (text, types[key].__name__, key), path=path, line=lineno)
        if unknown:
            raise ConfigError(unknown)
        if base is None and "scenario" in values:
            base = cls.for_scenario(values["scenario"]) if values["scenario"] in SCENARIOS else None
        return cls.from_dict(values, base=base)

    def to_dict(self):
        return asdict(self)

    def required_classes(self):
        """Number of distinct classes the scenario consumes."""
        if self.scenario == "s1":
            return max(self.eval_points) if self.eval_points else self.initial_classes
        if self.scenario == "s2":
            return (max(self.eval_points) if self.eval_points else self.initial_classes) + self.unknown_test_classes
        if self.scenario == "s3":
            return self.introduction_segments*(self.known_per_segment + self.unknown_per_segment)
        return 1

    def validate(self, dataset=None):
        """Every inconsistency of the configuration (and of its fit to dataset).

        Returns
        -------
        list of str
            Empty when the configuration can be run
        """
        v = []
        if self.scenario not in SCENARIOS:
            v.append("Unknown scenario '%s'. Available: %s." % (self.scenario, ", ".join(SCENARIOS)))
        if self.volume_profile not in VOLUME_PROFILES:
            v.append("Unknown volume_profile '%s'. Available: %s." % (self.volume_profile, ", ".join(VOLUME_PROFILES)))
        for name in ("initial_classes", "batch_classes", "segments", "introduction_segments",
                     "images_per_class_per_segment", "class_lifetime_segments"):
            if getattr(self, name) < 1:
                v.append("%s must be positive, got %d." % (name, getattr(self, name)))
        for name in ("known_per_segment", "unknown_per_segment", "warmup_segments", "unknown_test_classes"):
            if getattr(self, name) < 0:
                v.append("%s must not be negative, got %d." % (name, getattr(self, name)))
        if self.scenario == "s3" and self.introduction_segments > self.segments:
            v.append("introduction_segments (%d) exceeds segments (%d)." % (self.introduction_segments, self.segments))
        if not 0 < self.test_fraction < 1:
            v.append("test_fraction must lie strictly between 0 and 1, got %r." % self.test_fraction)
        if not self.eval_points:
            v.append("eval_points must not be empty.")
        elif any(b <= a for a, b in zip(self.eval_points, self.eval_points[1:])):
            v.append("eval_points must be strictly ascending, got %s." % self.eval_points)
        if self.scenario in ("s1", "s2") and self.initial_classes >= 1 and self.batch_classes >= 1:
            for p in self.eval_points:
                if p < self.initial_classes or (p - self.initial_classes) % self.batch_classes:
                    v.append("eval point %d is never reached: classes are added as %d + k*%d." % (p, self.initial_classes, self.batch_classes))
        for u in self.unknown_counts:
            if not 0 <= u <= self.unknown_test_classes:
                v.append("unknown count %d is outside [0, unknown_test_classes = %d]." % (u, self.unknown_test_classes))
        if self.known_classes and self.unknown_classes:
            both = sorted(set(self.known_classes) & set(self.unknown_classes))
            if both:
                v.append("Classes %s are listed as both known and unknown." % both)
        if dataset is not None and not v:
            v.extend(self._validate_dataset(dataset))
        return v

    def _validate_dataset(self, dataset):
        v = []
        available = set(dataset.classes)
        for name in ("known_classes", "unknown_classes"):
            missing = sorted(set(getattr(self, name) or []) - available)
            if missing:
                v.append("%s %s are absent from the dataset." % (name, missing))
        if v:
            return v
        need = self.required_classes()
        if len(available) < need:
            v.append("Scenario %s needs >= %d classes, the dataset has %d." % (self.scenario, need, len(available)))
            return v
        if self.scenario == "s3":
            rng = np.random.default_rng(self.seed)
            try:
                plan_scenario3(self, dataset, rng)
            except ConfigError as e:
                v.extend(e.violations)
        return v

    def check(self, dataset=None):
        """Raise :obj:`ConfigError` listing every violation."""
        violations = self.validate(dataset)
        if violations:
            raise ConfigError(violations)
        return self


def _convert(typ, text):
    if typ is bool:
        lowered = text.lower()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
        raise ValueError(text)
    if typ is list:
        if text.lower() in ("", "none"):
            return None
        return [int(p) for p in text.split(",") if p.strip()]
    return typ(text)


@dataclass(eq=False)
class StreamEvent:
    """One labelled arrival.

    known is the protocol's ground truth (metered as closed set when True,
    open set when False); trainable tells the runner whether the label is
    handed to the learner afterwards.
    """
    x: np.ndarray
    y: int
    known: bool
    segment: int
    trainable: bool = True


@dataclass(eq=False)
class Stream:
    """Events in arrival order plus the schedule they were drawn from."""
    events: list
    segments: list
    known_classes: list = field(default_factory=list)
    unknown_classes: list = field(default_factory=list)
    whitening: WhitenStats = None

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)


def _whitening(config, dataset, classes):
    if not config.whiten:
        return None
    indices = np.concatenate([dataset.class_index[c] for c in classes]) if classes else np.arange(dataset.n)
    return WhitenStats.from_features(dataset.features[indices])


def _features(dataset, stats):
    return dataset.features if stats is None else stats.apply(dataset.features)


def volume_weights(config):
    """Per-segment multiplier on the image quota; 'peaked' is triangular with mean 1."""
    S = config.segments
    if config.volume_profile == "flat":
        return np.ones(S)
    w = np.array([min(s, S + 1 - s) for s in range(1, S + 1)], dtype=float)
    return w/np.mean(w)


def segment_quotas(config):
    """Images per active class for segments 1..S."""
    return [int(round(config.images_per_class_per_segment*w)) for w in volume_weights(config)]


def active_segments(config, introduced):
    return range(introduced, min(introduced + config.class_lifetime_segments, config.segments + 1))


def plan_scenario3(config, dataset, rng):
    """Assign classes to roles and introduction segments.

    Returns
    -------
    schedule : dict
        class_id -> (introduction segment, known)
    """
    n_known = config.introduction_segments*config.known_per_segment
    n_unknown = config.introduction_segments*config.unknown_per_segment
    if config.known_classes is not None or config.unknown_classes is not None:
        unknown_pool = list(config.unknown_classes or [])
        known_pool = list(config.known_classes) if config.known_classes is not None else \
            [c for c in dataset.classes if c not in set(unknown_pool)]
        known_pool = [known_pool[i] for i in rng.permutation(len(known_pool))]
        unknown_pool = [unknown_pool[i] for i in rng.permutation(len(unknown_pool))]
    else:
        order = [dataset.classes[i] for i in rng.permutation(len(dataset.classes))]
        known_pool, unknown_pool = order[:n_known], order[n_known:n_known + n_unknown]
    violations = []
    if len(known_pool) < n_known:
        violations.append("Scenario s3 needs >= %d known classes, got %d." % (n_known, len(known_pool)))
    if len(unknown_pool) < n_unknown:
        violations.append("Scenario s3 needs >= %d unknown classes, got %d." % (n_unknown, len(unknown_pool)))
    if violations:
        raise ConfigError(violations)

    schedule = {}
    for s in range(1, config.introduction_segments + 1):
        for c in known_pool[(s - 1)*config.known_per_segment:s*config.known_per_segment]:
            schedule[c] = (s, True)
        for c in unknown_pool[(s - 1)*config.unknown_per_segment:s*config.unknown_per_segment]:
            schedule[c] = (s, False)

    quotas = segment_quotas(config)
    shortfalls = []
    for c, (introduced, _) in sorted(schedule.items()):
        need = sum(quotas[s - 1] for s in active_segments(config, introduced))
        have = len(dataset.class_index[c])
        if need > have:
            shortfalls.append("class %d needs %d images, the dataset has %d" % (c, need, have))
    if shortfalls:
        raise ConfigError(["Insufficient images per class: " + "; ".join(shortfalls) + "."])
    return schedule


def generate_scenario3(config, dataset):
    """Segmented stream with classes that appear, stay active and dry up.

    Classes are introduced during the first introduction_segments segments,
    each stays active for class_lifetime_segments segments and contributes
    its quota of images to every active segment. Events within a segment are
    shuffled.

    Returns
    -------
    :obj:`Stream`
    """
    config.check(dataset)
    rng = np.random.default_rng(config.seed)
    schedule = plan_scenario3(config, dataset, rng)
    first = [c for c, (s, known) in sorted(schedule.items()) if s == 1 and known] or \
            [c for c, (s, _) in sorted(schedule.items()) if s == 1]
    stats = _whitening(config, dataset, first)
    X = _features(dataset, stats)

    pools = {c: dataset.class_index[c][rng.permutation(len(dataset.class_index[c]))] for c in sorted(schedule)}
    used = {c: 0 for c in pools}
    quotas = segment_quotas(config)
    events = []
    seen = set()
    for s in range(1, config.segments + 1):
        drawn = []
        for c, (introduced, known) in sorted(schedule.items()):
            if s not in active_segments(config, introduced):
                continue
            take = pools[c][used[c]:used[c] + quotas[s - 1]]
            used[c] += len(take)
            drawn.extend((i, c, known) for i in take)
        for j in rng.permutation(len(drawn)):
            i, c, known = drawn[j]
            if config.train_unknown:
                events.append(StreamEvent(X[i].copy(), c, c in seen, s, True))
            else:
                events.append(StreamEvent(X[i].copy(), c, known, s, known))
            seen.add(c)
    known_classes = sorted(c for c, (_, k) in schedule.items() if k)
    unknown_classes = sorted(c for c, (_, k) in schedule.items() if not k)
    logger.info("scenario s3: %d events over %d segments, %d known and %d unknown classes",
                len(events), config.segments, len(known_classes), len(unknown_classes))
    return Stream(events, list(range(1, config.segments + 1)), known_classes, unknown_classes, stats)


def generate_custom(config, dataset):
    """Whole dataset, shuffled and cut into equal segments.

    Classes in unknown_classes are metered as open set; all others are known.
    """
    config.check(dataset)
    rng = np.random.default_rng(config.seed)
    unknown = set(config.unknown_classes or [])
    known = set(config.known_classes) if config.known_classes is not None else set(dataset.classes) - unknown
    order = rng.permutation(dataset.n)
    chunks = np.array_split(order, config.segments)
    first = sorted(set(dataset.labels[chunks[0]].tolist()) & known) if len(chunks[0]) else []
    stats = _whitening(config, dataset, first)
    X = _features(dataset, stats)
    events = []
    seen = set()
    for s, chunk in enumerate(chunks, start=1):
        for i in chunk:
            c = int(dataset.labels[i])
            if config.train_unknown:
                events.append(StreamEvent(X[i].copy(), c, c in seen, s, True))
            else:
                events.append(StreamEvent(X[i].copy(), c, c in known, s, c in known))
            seen.add(c)
    return Stream(events, list(range(1, config.segments + 1)), sorted(known), sorted(unknown), stats)


def _split(config, dataset, classes, rng):
    """Per-class train/test split; returns (train indices per class, test indices)."""
    train = {}
    test = []
    for c in classes:
        idx = dataset.class_index[c][rng.permutation(len(dataset.class_index[c]))]
        n_test = int(round(config.test_fraction*len(idx))) if len(idx) > 1 else 0
        test.append(idx[:n_test])
        train[c] = idx[n_test:]
    return train, np.concatenate(test) if test else np.zeros(0, dtype=int)


@dataclass(eq=False)
class ClassBatch:
    """Training samples of a group of new classes."""
    index: int
    classes: list
    events: list
    class_count: int
    evaluate: bool


@dataclass(eq=False)
class IncrementalScenario:
    batches: list
    test_features: np.ndarray
    test_labels: np.ndarray
    whitening: WhitenStats = None


def _batches(config, dataset, classes, train, X, rng, last):
    batches = []
    start, index = 0, 0
    size = config.initial_classes
    while start < last:
        group = classes[start:start + size]
        idx = np.concatenate([train[c] for c in group])
        idx = idx[rng.permutation(len(idx))]
        events = [StreamEvent(X[i].copy(), int(dataset.labels[i]), True, index, True) for i in idx]
        count = start + len(group)
        batches.append(ClassBatch(index, list(group), events, count, count in config.eval_points))
        start, index, size = count, index + 1, config.batch_classes
    return batches


def generate_scenario1(config, dataset):
    """Class-incremental batches: an initial batch, then batch_classes at a time.

    Each batch is shuffled internally. A held-out test split of every used
    class is kept aside; evaluation fires after the batches whose cumulative
    class count is an eval point.

    Returns
    -------
    :obj:`IncrementalScenario`
    """
    config.check(dataset)
    rng = np.random.default_rng(config.seed)
    classes = [dataset.classes[i] for i in rng.permutation(len(dataset.classes))]
    last = max(config.eval_points)
    classes = classes[:last]
    train, test = _split(config, dataset, classes, rng)
    stats = _whitening(config, dataset, classes[:config.initial_classes])
    X = _features(dataset, stats)
    batches = _batches(config, dataset, classes, train, X, rng, last)
    return IncrementalScenario(batches, X[test], dataset.labels[test].copy(), stats)


@dataclass(eq=False)
class OpenWorldIteration:
    """One training batch of the open world protocol.

    known_classes holds every class learnt after this iteration; unknown_pool
    the classes that are still to come, nearest first.
    """
    index: int
    known_classes: list
    events: list
    unknown_pool: list
    evaluate: bool


@dataclass(eq=False)
class OpenWorldScenario:
    iterations: list
    test_features: np.ndarray
    test_labels: np.ndarray
    whitening: WhitenStats = None


def generate_scenario2(config, dataset):
    """Open world protocol: batches of new classes, tested against known plus unknown classes.

    The unknown pool of an iteration is every class that has not been learnt
    yet; it shrinks as classes migrate to known.

    Returns
    -------
    :obj:`OpenWorldScenario`
    """
    config.check(dataset)
    rng = np.random.default_rng(config.seed)
    last = max(config.eval_points)
    classes = [dataset.classes[i] for i in rng.permutation(len(dataset.classes))]
    classes = classes[:last + config.unknown_test_classes]
    train, test = _split(config, dataset, classes, rng)
    stats = _whitening(config, dataset, classes[:config.initial_classes])
    X = _features(dataset, stats)
    iterations = []
    for batch in _batches(config, dataset, classes[:last], train, X, rng, last):
        known = classes[:batch.class_count]
        iterations.append(OpenWorldIteration(batch.index, known, batch.events, classes[batch.class_count:], batch.evaluate))
    return OpenWorldScenario(iterations, X[test], dataset.labels[test].copy(), stats)


def _predict(learner, x, closed_set=False):
    try:
        label, confidence = learner.predict_open(x)
        if closed_set:
            label = learner.predict(x)
    except EmptyModelError:
        return UNKNOWN, 0.0
    return label, confidence


def _learn(learner, event):
    try:
        learner.learn_open(event.x, event.y)
    except OpenWorldError as e:
        learner.skipped += 1
        logger.warning("Skipped sample of class %s in segment %s: %s", event.y, event.segment, e)


def run_protocol(learner, stream, evaluator=None, freeze_after_segment=None, closed_set=False):
    """Open world online learning template: predict, meter, then learn.

    Parameters
    ----------
    learner : :obj:`~openworld.learner.Learner`
    stream : :obj:`Stream` or sequence of :obj:`StreamEvent`
    evaluator : :obj:`~openworld.evaluation.OpenWorldEvaluator`, optional
    freeze_after_segment : int, optional
        Freeze the learner's metric and threshold once this segment is over
    closed_set : bool, optional
        Meter the closed-set prediction instead of the open world one

    Returns
    -------
    list of :obj:`~openworld.evaluation.SegmentReport`
        One report per segment, empty segments included
    """
    if evaluator is None:
        evaluator = OpenWorldEvaluator()
    events = list(stream)
    segments = list(getattr(stream, "segments", None) or sorted({e.segment for e in events}))
    by_segment = {s: [] for s in segments}
    for e in events:
        by_segment.setdefault(e.segment, []).append(e)
    for s in sorted(by_segment):
        for event in by_segment[s]:
            threshold = learner.threshold
            try:
                label, confidence = _predict(learner, event.x, closed_set)
            except OpenWorldError as e:
                learner.skipped += 1
                logger.warning("Prediction failed for class %s in segment %s: %s", event.y, s, e)
                continue
            evaluator.record(event, label, confidence, threshold)
            if event.trainable:
                _learn(learner, event)
        evaluator.close_segment(s)
        if freeze_after_segment is not None and s == freeze_after_segment and not learner.frozen:
            logger.info("Freezing metric and threshold after segment %d", s)
            learner.freeze()
    return evaluator.reports


def run_incremental(learner, scenario):
    """Closed-set top-1 accuracy on the classes seen so far, at every eval point.

    Returns
    -------
    list of dict
        Rows with keys classes, accuracy
    """
    rows = []
    seen = []
    for batch in scenario.batches:
        for event in batch.events:
            _learn(learner, event)
        seen.extend(batch.classes)
        if batch.index == 0 and learner.freeze_after_warmup:
            learner.freeze()
        if not batch.evaluate:
            continue
        mask = np.isin(scenario.test_labels, seen)
        hits = [_predict(learner, x, closed_set=True)[0] == y
                for x, y in zip(scenario.test_features[mask], scenario.test_labels[mask].tolist())]
        accuracy = float(np.mean(hits)) if hits else 0.0
        logger.info("classes=%d accuracy=%.4f", batch.class_count, accuracy)
        rows.append({"classes": batch.class_count, "accuracy": accuracy})
    return rows


def run_open_world(learner, scenario, unknown_counts):
    """Open world top-1 accuracy over the grid known classes x unknown test classes.

    UNKNOWN counts as one extra category: a sample of an unknown class is
    correct only when predicted UNKNOWN.

    Returns
    -------
    list of dict
        Rows with keys known_classes, unknown_classes, accuracy, closed_acc, open_acc
    """
    rows = []
    for iteration in scenario.iterations:
        for event in iteration.events:
            _learn(learner, event)
        if iteration.index == 0 and learner.freeze_after_warmup:
            learner.freeze()
        if not iteration.evaluate:
            continue
        predictions = {}
        for u in unknown_counts:
            unknown = iteration.unknown_pool[:u]
            mask = np.isin(scenario.test_labels, iteration.known_classes + unknown)
            batch = []
            for i in np.flatnonzero(mask):
                if i not in predictions:
                    predictions[i] = _predict(learner, scenario.test_features[i])[0]
                y = int(scenario.test_labels[i])
                batch.append((predictions[i], y, y in iteration.known_classes))
            closed, open_, _ = score_open_world(batch)
            accuracy = float(np.mean([is_hit(*p) for p in batch])) if batch else 0.0
            rows.append({"known_classes": len(iteration.known_classes), "unknown_classes": u,
                         "accuracy": accuracy, "closed_acc": closed, "open_acc": open_})
    return rows
