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

"""Command line entry point: ``openworld run`` and ``openworld validate``."""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .dataio import PRESETS, load_features, save_snapshot, synth_preset
from .evaluation import OpenWorldEvaluator, write_reports_jsonl, write_reports_table, write_rows
from .exceptions import OpenWorldError
from .manager import LEARNERS, make_learner
from .solution import RunSolution
from .stream import (SCENARIOS, ScenarioConfig, generate_custom, generate_scenario1,
                     generate_scenario2, generate_scenario3, run_incremental, run_open_world,
                     run_protocol)

logger = logging.getLogger(__name__)

LOG_LEVELS = {"error": logging.ERROR,
              "warn": logging.WARNING,
              "warning": logging.WARNING,
              "info": logging.INFO,
              "debug": logging.DEBUG}


def configure_logging():
    """Set the root log level from OPENWORLD_LOG (error, warn, info, debug)."""
    value = os.environ.get("OPENWORLD_LOG", "warn").strip().lower()
    level = LOG_LEVELS.get(value)
    logging.basicConfig(level=logging.WARNING if level is None else level,
                        format="%(levelname)s %(name)s: %(message)s")
    if level is None:
        logger.warning("Unknown OPENWORLD_LOG value '%s'; using 'warn'.", value)


@dataclass
class RunManifest:
    """Everything that determines a run."""
    config: ScenarioConfig = field(default_factory=ScenarioConfig)
    learner: str = "onno"
    data: str = None
    synth: str = None
    out: str = "openworld-out"
    gamma: float = None
    rank_m: int = None
    gradient_backend: str = "analytic"

    @property
    def seed(self):
        return self.config.seed

    def with_seed(self, seed, out=None):
        return replace(self, config=replace(self.config, seed=seed), out=self.out if out is None else out)

    def to_dict(self):
        return {"config": self.config.to_dict(),
                "seed": self.seed,
                "learner": self.learner,
                "data": self.data,
                "synth": self.synth,
                "out": self.out,
                "gamma": self.gamma,
                "rank_m": self.rank_m,
                "gradient_backend": self.gradient_backend}

    def violations(self):
        v = []
        if self.learner not in LEARNERS:
            v.append("learner '%s' not found. Available: %s." % (self.learner, ", ".join(LEARNERS)))
        if (self.data is None) == (self.synth is None):
            v.append("You forgot to choose a dataset: give either --data <path> or --synth <preset>.")
        elif self.synth is not None and self.synth not in PRESETS:
            v.append("Synthetic preset '%s' not found. Available: %s." % (self.synth, ", ".join(sorted(PRESETS))))
        return v

    def load_dataset(self):
        if self.synth is not None:
            return synth_preset(self.synth, seed=self.seed)
        return load_features(self.data)

    def make_learner(self, d):
        return make_learner(self.learner, d, gamma=self.gamma, rank=self.rank_m,
                            gradient_backend=self.gradient_backend)


def _error(message):
    print("error: %s" % message, file=sys.stderr)


def _write_json(data, path):
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_run(manifest):
    """Run one manifest end to end and write its report files.

    Returns
    -------
    int
        0 on success, 2 on configuration or data errors
    """
    violations = manifest.violations()
    if violations:
        for v in violations:
            _error(v)
        return 2
    try:
        dataset = manifest.load_dataset()
        manifest.config.check(dataset)
    except OpenWorldError as e:
        for v in getattr(e, "violations", [str(e)]):
            _error(v)
        return 2

    config = manifest.config
    learner = manifest.make_learner(dataset.d)
    if config.scenario == "s2" and learner.kind == "ncm":
        logger.warning("Learner '%s' cannot predict UNKNOWN; expect an open set accuracy near 0.", manifest.learner)
    os.makedirs(manifest.out, exist_ok=True)
    summary = {"learner": manifest.learner, "scenario": config.scenario, "seed": config.seed}

    if config.scenario in ("s3", "custom"):
        stream = generate_scenario3(config, dataset) if config.scenario == "s3" else generate_custom(config, dataset)
        evaluator = OpenWorldEvaluator()
        freeze_after = config.warmup_segments if learner.freeze_after_warmup else None
        reports = run_protocol(learner, stream, evaluator, freeze_after_segment=freeze_after)
        write_reports_jsonl(reports, os.path.join(manifest.out, "segments.jsonl"))
        write_reports_table(reports, os.path.join(manifest.out, "segments.csv"))
        solution = RunSolution(evaluator, learner)
        summary.update(solution.summary())
        summary.update(solution.stats)
    elif config.scenario == "s1":
        rows = run_incremental(learner, generate_scenario1(config, dataset))
        write_rows(rows, os.path.join(manifest.out, "incremental.csv"))
        summary["accuracy"] = rows[-1]["accuracy"] if rows else None
        summary["skipped"] = learner.skipped
    else:
        rows = run_open_world(learner, generate_scenario2(config, dataset), config.unknown_counts)
        write_rows(rows, os.path.join(manifest.out, "open_world.csv"))
        summary["accuracy"] = rows[-1]["accuracy"] if rows else None
        summary["skipped"] = learner.skipped

    _write_json(manifest.to_dict(), os.path.join(manifest.out, "manifest.json"))
    _write_json(summary, os.path.join(manifest.out, "summary.json"))
    save_snapshot(learner, os.path.join(manifest.out, "snapshot.json"))
    print(" ".join("%s=%s" % (k, ("%.4f" % v) if isinstance(v, float) else v) for k, v in summary.items()))
    return 0


def cmd_run_many(manifest, repeat=1, jobs=1):
    """Run seeds seed .. seed + repeat - 1, each in its own output directory."""
    if repeat <= 1:
        return cmd_run(manifest)
    manifests = [manifest.with_seed(manifest.seed + i, out=os.path.join(manifest.out, "seed_%d" % (manifest.seed + i)))
                 for i in range(repeat)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(cmd_run, manifests))
    else:
        codes = [cmd_run(m) for m in manifests]
    return max(codes)


def cmd_validate(manifest):
    """Check configuration and dataset fit without running.

    Returns
    -------
    int
        0 when consistent, 1 when violations were found, 2 when the data cannot be read
    """
    violations = manifest.violations()
    if not violations:
        try:
            dataset = manifest.load_dataset()
        except OpenWorldError as e:
            _error(str(e))
            return 2
        violations = manifest.config.validate(dataset)
    for v in violations:
        _error(v)
    if violations:
        return 1
    print("ok: scenario %s, %d classes, d = %d" % (manifest.config.scenario, len(dataset.classes), dataset.d))
    return 0


def _add_arguments(parser):
    parser.add_argument("--scenario", choices=SCENARIOS, default=None,
                        help="evaluation protocol (default: from --config, else s3)")
    parser.add_argument("--learner", default="onno", help="one of: %s" % ", ".join(LEARNERS))
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--data", help="feature file (OWFS binary or label,f1,...,fd text)")
    source.add_argument("--synth", help="synthetic preset: %s" % ", ".join(sorted(PRESETS)))
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--gamma", type=float, default=None, help="metric learning rate")
    parser.add_argument("--rank-m", type=int, default=None, help="rank of the metric")
    parser.add_argument("--gradient-backend", choices=("analytic", "casadi"), default="analytic")
    parser.add_argument("--out", default="openworld-out", help="output directory")
    parser.add_argument("--config", default=None, help="flat key = value scenario file")


def build_manifest(args):
    """Scenario preset, then the config file, then command line flags."""
    scenario = args.scenario
    if args.config is not None and scenario is None:
        scenario = ScenarioConfig.from_file(args.config).scenario
    scenario = scenario or "s3"
    config = ScenarioConfig.for_scenario(scenario, preset=args.synth)
    if args.config is not None:
        config = ScenarioConfig.from_file(args.config, base=config)
    config = replace(config, scenario=scenario)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return RunManifest(config=config, learner=args.learner, data=args.data, synth=args.synth,
                       out=args.out, gamma=args.gamma, rank_m=args.rank_m,
                       gradient_backend=args.gradient_backend)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="openworld", description="Online open world recognition.")
    commands = parser.add_subparsers(dest="command")
    commands.required = True
    run = commands.add_parser("run", help="run a scenario and write its reports")
    _add_arguments(run)
    run.add_argument("--repeat", type=int, default=1, help="number of consecutive seeds")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for --repeat")
    validate = commands.add_parser("validate", help="check configuration and data without running")
    _add_arguments(validate)
    args = parser.parse_args(argv)

    configure_logging()
    try:
        manifest = build_manifest(args)
    except OpenWorldError as e:
        for v in getattr(e, "violations", [str(e)]):
            _error(v)
        return 2
    except OSError as e:
        _error("Cannot read config file: %s" % e)
        return 2
    if args.command == "run":
        return cmd_run_many(manifest, repeat=args.repeat, jobs=args.jobs)
    return cmd_validate(manifest)
