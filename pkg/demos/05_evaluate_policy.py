#!/usr/bin/env python3
"""Run the trained checkpoint in the simulator.

Co-planning (the model drives both ends, eight planned actions per sample)
on the maps it trained on, then a reactive run against a scripted partner
that insists on its own route. Needs demo_outputs/codp_h_demo.ckpt from
04_train_policy.py.
"""

import pathlib
import sys

from copolicy.maps import builtin_suite
from copolicy.metrics import bin_interaction_forces, render_heatmap
from copolicy.runtime import RuntimeConfig, evaluate_suite, format_summary_table, run_episode
from copolicy.sim import PhysicsParams
from copolicy.training import load_policy

out = pathlib.Path("demo_outputs")
ckpt = out / "codp_h_demo.ckpt"
if not ckpt.exists():
    sys.exit("run 04_train_policy.py first")

params = PhysicsParams()
model, stats, meta = load_policy(ckpt)
maps = builtin_suite("train")[:6]

rows, summary = evaluate_suite(
    {"codp_h": (model, stats)},
    {"train": maps},
    lambda m: RuntimeConfig.coplan(),
    seeds_per_map=3,
    params=params,
)
print(format_summary_table(summary))

# one reactive episode against a stubborn scripted partner
rec = run_episode(maps[1], model, stats,
                  RuntimeConfig.reactive("scripted:stubborn_below"),
                  seed=5, params=params)
print(f"reactive vs stubborn_below on {rec.map.map_id}: {rec.outcome} "
      f"after {rec.duration_s(params):.1f} s "
      f"(mean plan {sum(rec.plan_ms) / len(rec.plan_ms):.0f} ms)")

grid = bin_interaction_forces([rec], params)
render_heatmap(out / "reactive_forces.png", grid, rec.map, "interaction forces")
print(f"wrote {out / 'reactive_forces.png'}")
