import unittest
from functools import lru_cache

from openworld import OpenWorldEvaluator, ScenarioConfig, make_learner, run_protocol
from openworld.dataio import synth_preset
from openworld.stream import generate_custom, generate_scenario3


def closed_set_window(learner_name, preset, seed=0, window=500):
    config = ScenarioConfig.for_scenario("custom", preset=preset, seed=seed)
    dataset = synth_preset(preset, seed=seed)
    stream = generate_custom(config, dataset)
    evaluator = OpenWorldEvaluator()
    run_protocol(make_learner(learner_name, dataset.d), stream, evaluator, closed_set=True)
    return evaluator.window_accuracy(window)


@lru_cache(maxsize=None)
def halo_run(learner_name, seed=0):
    config = ScenarioConfig.for_scenario("s3", preset="halo", seed=seed)
    dataset = synth_preset("halo", seed=seed)
    learner = make_learner(learner_name, dataset.d)
    evaluator = OpenWorldEvaluator()
    freeze_after = config.warmup_segments if learner.freeze_after_warmup else None
    reports = run_protocol(learner, generate_scenario3(config, dataset), evaluator, freeze_after_segment=freeze_after)
    return evaluator, reports


class SyntheticTests(unittest.TestCase):

    def test_separable_blobs(self):
        for name in ("oncm", "onbc"):
            self.assertGreaterEqual(closed_set_window(name, "separable3"), 0.9, name)

    def test_xor_needs_local_boundaries(self):
        self.assertGreaterEqual(closed_set_window("onbc", "xor4"), 0.85)
        self.assertLessEqual(closed_set_window("oncm", "xor4"), 0.6)

    def test_halo_rejection(self):
        evaluator, reports = halo_run("onno")
        self.assertEqual(len(reports), 8)
        self.assertGreaterEqual(evaluator.harmonic, 0.6)

    def test_halo_threshold_between_confidences(self):
        _, reports = halo_run("onno")
        between = [r.mean_open_confidence < r.mean_threshold < r.mean_closed_confidence for r in reports]
        self.assertGreaterEqual(sum(between), 0.5*len(reports))

    def test_halo_confidences_apart(self):
        _, reports = halo_run("onbc")
        apart = [r.mean_closed_confidence > r.mean_open_confidence for r in reports
                 if r.mean_closed_confidence is not None and r.mean_open_confidence is not None]
        self.assertEqual(len(apart), 8)
        self.assertGreaterEqual(sum(apart), 0.75*len(apart))

    def test_halo_online_beats_frozen(self):
        online, _ = halo_run("onno")
        frozen, reports = halo_run("nno-fixed")
        self.assertEqual(len(reports), 8)
        margin = online.harmonic - frozen.harmonic
        self.assertGreaterEqual(margin, 0, "online minus frozen harmonic accuracy: %+.3f" % margin)


if __name__ == '__main__':
    unittest.main()
