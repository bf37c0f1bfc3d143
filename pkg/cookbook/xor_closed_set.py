# Recipe: Local balls against a single class mean on an XOR layout
from openworld import OpenWorldEvaluator, ScenarioConfig, make_learner, run_protocol
from openworld.dataio import synth_preset
from openworld.stream import generate_custom

config = ScenarioConfig.for_scenario("custom", preset="xor4", seed=0)
dataset = synth_preset("xor4", seed=config.seed)
stream = generate_custom(config, dataset)

for name in ["oncm", "onbc", "nbc-l2"]:
    learner = make_learner(name, dataset.d)
    evaluator = OpenWorldEvaluator()
    run_protocol(learner, stream, evaluator, closed_set=True)
    extra = " balls=%d" % len(learner.balls) if hasattr(learner, "balls") else ""
    print("%-7s accuracy over the last 500 steps: %.3f%s" % (name, evaluator.window_accuracy(500), extra))
