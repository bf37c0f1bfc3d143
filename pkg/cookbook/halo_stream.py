# Recipe: Open world stream with two known blobs and an unknown ring
from openworld import OpenWorldEvaluator, RunSolution, ScenarioConfig, make_learner, run_protocol
from openworld.dataio import synth_preset
from openworld.stream import generate_scenario3

config = ScenarioConfig.for_scenario("s3", preset="halo", seed=0)
dataset = synth_preset("halo", seed=config.seed)
stream = generate_scenario3(config, dataset)

results = {}
for name in ["onno", "nno-fixed", "nno-eq7", "onbc", "nbc-fixed", "nbc-l2"]:
    learner = make_learner(name, dataset.d)
    evaluator = OpenWorldEvaluator()
    freeze_after = config.warmup_segments if learner.freeze_after_warmup else None
    run_protocol(learner, stream, evaluator, freeze_after_segment=freeze_after)
    results[name] = sol = RunSolution(evaluator, learner)

    segments, cc = sol.sample("mean_closed_confidence")
    _, oc = sol.sample("mean_open_confidence")
    _, thr = sol.sample("mean_threshold")
    apart = sum(c > o for c, o in zip(cc, oc))
    between = sum(o < t < c for c, o, t in zip(cc, oc, thr))
    print("%-10s closed=%.3f open=%.3f harmonic=%.3f  cc>oc in %d/%d segments, threshold between in %d/%d"
          % (name, sol.value("closed_acc"), sol.value("open_acc"), sol.value("harmonic"),
             apart, len(segments), between, len(segments)))

margin = results["onno"].value("harmonic") - results["nno-fixed"].value("harmonic")
print("online minus fixed harmonic accuracy (oNNO): %+.3f" % margin)
