#!/usr/bin/env python3
"""Train a small partner-conditioned policy on a few maps.

A short run on a reduced corpus: enough to watch the noise-prediction loss
fall well below its untrained level (about 1.0) and to produce a usable
checkpoint for the next script. Expect a few minutes of CPU time.
"""

import pathlib

from copolicy.demos import generate_demos
from copolicy.denoiser import ModelConfig
from copolicy.maps import builtin_suite
from copolicy.sim import PhysicsParams
from copolicy.training import TrainConfig, train_denoiser

out = pathlib.Path("demo_outputs")
out.mkdir(exist_ok=True)

params = PhysicsParams()
maps = builtin_suite("train")[:6]
episodes = generate_demos(maps, n_per_mode=4, seed=7, params=params)
print(f"training corpus: {len(episodes)} episodes on {len(maps)} maps")

model_cfg = ModelConfig(n_layers=3, n_heads=4, d_model=64, d_ff=256, dropout=0.1)
train_cfg = TrainConfig(variant="codp_h", steps=2500, batch_size=64, lr=5e-4, seed=0)

model, result = train_denoiser(
    episodes, params, model_cfg, train_cfg,
    checkpoint_path=out / "codp_h_demo.ckpt",
    log_path=out / "train_log.csv",
    progress=lambda s, l: print(f"  step {s:5d}  loss {l:.4f}"),
)
print(f"loss: {result.log_rows[0]['loss']:.3f} (start) -> "
      f"{result.final_level(100):.3f} (last 100 steps)")
print(f"checkpoint: {out / 'codp_h_demo.ckpt'}")
