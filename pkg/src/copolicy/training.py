"""Training loops: the diffusion denoiser (both conditioning variants) and
the behavior-cloning baseline. Deterministic for a given seed; every step
is logged as a CSV row (step, loss, grad_norm, lr, wall_ms)."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from .dataset import EpisodeRecord, WindowSet, all_obs_ticks, build_windows
from .denoiser import BCBaseline, Denoiser, ModelConfig
from .diffusion import forward_noise, training_loss
from .obs import NormStats, fit_norm_stats
from .optim import load_checkpoint, save_checkpoint
from .schedule import make_schedule
from .sim import PhysicsParams
from . import tensor as T

VARIANTS = ("codp_h", "codp", "bc")


@dataclass
class TrainConfig:
    variant: str = "codp_h"
    steps: int = 10_000
    batch_size: int = 64
    lr: float = 3e-4
    lr_min_fraction: float = 0.1
    weight_decay: float = 1e-4
    grad_clip: float = 1.0
    warmup_steps: int = 300
    ema_decay: float = 0.999  # 0 disables the inference weight average
    seed: int = 0
    schedule_kind: str = "cosine"
    log_every: int = 1
    checkpoint_every: int = 0  # 0 = final only
    shards: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; want one of {VARIANTS}")


@dataclass
class TrainResult:
    log_rows: list[dict]
    final_loss: float
    norm_stats: NormStats

    def initial_plateau(self, n: int = 50) -> float:
        return float(np.mean([r["loss"] for r in self.log_rows[:n]]))

    def final_level(self, n: int = 50) -> float:
        return float(np.mean([r["loss"] for r in self.log_rows[-n:]]))


def cosine_lr(step: int, total: int, base: float, min_fraction: float,
              warmup: int = 0) -> float:
    if warmup > 0 and step < warmup:
        return base * (step + 1) / warmup
    if total <= 1:
        return base
    frac = step / (total - 1)
    return base * (min_fraction + (1 - min_fraction) * 0.5 * (1 + math.cos(math.pi * frac)))


def normalized_windows(windows: WindowSet, stats: NormStats):
    obs = (windows.obs - stats.obs_mean) / stats.obs_scale
    human = windows.human / stats.action_scale
    target = windows.target / stats.action_scale
    return obs, human, target, windows.valid


def prepare_training_data(episodes: list[EpisodeRecord], params: PhysicsParams,
                          model_cfg: ModelConfig):
    windows = build_windows(episodes, params, model_cfg.t_obs, model_cfg.t_pred)
    stats = fit_norm_stats(all_obs_ticks(episodes), params.f_max)
    return normalized_windows(windows, stats), stats


def _write_log(path, rows: list[dict]) -> None:
    if path is None:
        return
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["step", "loss", "grad_norm", "lr", "wall_ms"])
        w.writeheader()
        for r in rows:
            w.writerow(r)


def _sharded_loss(model, sched, obs, human, valid, target, rng, shards):
    """Data-parallel batch sharding: forward passes run on worker threads,
    then losses reduce and backward runs in fixed shard order so the result
    is reproducible regardless of thread scheduling."""
    from concurrent.futures import ThreadPoolExecutor

    b = obs.shape[0]
    ks = rng.integers(1, sched.K + 1, size=b)
    eps = rng.standard_normal(target.shape)
    x_k = forward_noise(target, ks, sched, eps)
    bounds = np.linspace(0, b, shards + 1).astype(int)
    shard_rngs = rng.spawn(shards)

    def shard_forward(si):
        lo, hi = bounds[si], bounds[si + 1]
        pred = model.forward(obs[lo:hi], human[lo:hi], valid[lo:hi],
                             x_k[lo:hi], ks[lo:hi], training=True,
                             rng=shard_rngs[si])
        return T.mse(pred, eps[lo:hi])

    with ThreadPoolExecutor(max_workers=shards) as pool:
        losses = list(pool.map(shard_forward, range(shards)))
    total = None
    for si, loss in enumerate(losses):  # fixed reduction order
        w = (bounds[si + 1] - bounds[si]) / b
        part = T.scale(loss, w)
        total = part if total is None else T.add(total, part)
    return total


def train_denoiser(episodes: list[EpisodeRecord], params: PhysicsParams,
                   model_cfg: ModelConfig, train_cfg: TrainConfig,
                   checkpoint_path=None, log_path=None,
                   progress=None) -> tuple[Denoiser, TrainResult]:
    """Optimize the noise-prediction loss over plan-rate windows."""
    if train_cfg.variant == "bc":
        raise ValueError("use train_bc for the behavior-cloning baseline")
    model_cfg.condition_on_human = train_cfg.variant == "codp_h"
    (obs, human, target, valid), stats = prepare_training_data(episodes, params, model_cfg)
    n = obs.shape[0]
    if n < train_cfg.batch_size:
        raise ValueError(f"only {n} windows; need at least one full batch")

    model = Denoiser(model_cfg, seed=train_cfg.seed)
    sched = make_schedule(model_cfg.diffusion_steps, train_cfg.schedule_kind)
    rng = np.random.default_rng(np.random.SeedSequence(train_cfg.seed, spawn_key=(1,)))
    rows: list[dict] = []
    t_start = time.perf_counter()

    for step_i in range(train_cfg.steps):
        idx = rng.integers(0, n, size=train_cfg.batch_size)
        b_obs, b_hum, b_val = obs[idx], human[idx], valid[idx]

        model.store.zero_grads()
        if train_cfg.shards > 1:
            loss_t = _sharded_loss(model, sched, b_obs, b_hum, b_val,
                                   target[idx], rng, train_cfg.shards)
        else:
            def predict(noisy, ks):
                return model.forward(b_obs, b_hum, b_val, noisy, ks,
                                     training=True, rng=rng)

            loss_t, _ = training_loss(predict, sched, target[idx], rng)
        T.backward(loss_t)
        lr = cosine_lr(step_i, train_cfg.steps, train_cfg.lr,
                       train_cfg.lr_min_fraction, train_cfg.warmup_steps)
        gnorm = (model.store.clip_grad_norm(train_cfg.grad_clip)
                 if train_cfg.grad_clip > 0 else model.store.grad_norm())
        model.store.adam_step(lr=lr, weight_decay=train_cfg.weight_decay)
        if train_cfg.ema_decay > 0:
            model.store.ema_update(train_cfg.ema_decay)

        if step_i % train_cfg.log_every == 0 or step_i == train_cfg.steps - 1:
            rows.append({
                "step": step_i,
                "loss": float(loss_t.item()),
                "grad_norm": gnorm,
                "lr": lr,
                "wall_ms": (time.perf_counter() - t_start) * 1000.0,
            })
        if progress is not None and step_i % 500 == 0:
            progress(step_i, float(loss_t.item()))
        if (train_cfg.checkpoint_every and checkpoint_path is not None
                and step_i and step_i % train_cfg.checkpoint_every == 0):
            save_denoiser(checkpoint_path, model, stats, train_cfg)

    result = TrainResult(log_rows=rows, final_loss=rows[-1]["loss"], norm_stats=stats)
    if train_cfg.ema_decay > 0:
        model = Denoiser(model.config, store=model.store.ema_snapshot())
    if checkpoint_path is not None:
        save_denoiser(checkpoint_path, model, stats, train_cfg)
    _write_log(log_path, rows)
    return model, result


def train_bc(episodes: list[EpisodeRecord], params: PhysicsParams,
             model_cfg: ModelConfig, train_cfg: TrainConfig,
             checkpoint_path=None, log_path=None) -> tuple[BCBaseline, TrainResult]:
    """MSE regression from conditioning windows onto the next joint action."""
    (obs, human, target, valid), stats = prepare_training_data(episodes, params, model_cfg)
    n = obs.shape[0]
    next_action = target[:, 0, :]  # the plan step being predicted

    model = BCBaseline(model_cfg, seed=train_cfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence(train_cfg.seed, spawn_key=(2,)))
    rows: list[dict] = []
    t_start = time.perf_counter()
    for step_i in range(train_cfg.steps):
        idx = rng.integers(0, n, size=min(train_cfg.batch_size, n))
        model.store.zero_grads()
        pred = model.forward(obs[idx], human[idx])
        loss_t = T.mse(pred, next_action[idx])
        T.backward(loss_t)
        lr = cosine_lr(step_i, train_cfg.steps, train_cfg.lr, train_cfg.lr_min_fraction)
        gnorm = (model.store.clip_grad_norm(train_cfg.grad_clip)
                 if train_cfg.grad_clip > 0 else model.store.grad_norm())
        model.store.adam_step(lr=lr, weight_decay=train_cfg.weight_decay)
        if step_i % train_cfg.log_every == 0 or step_i == train_cfg.steps - 1:
            rows.append({"step": step_i, "loss": float(loss_t.item()),
                         "grad_norm": gnorm, "lr": lr,
                         "wall_ms": (time.perf_counter() - t_start) * 1000.0})
    result = TrainResult(log_rows=rows, final_loss=rows[-1]["loss"], norm_stats=stats)
    if checkpoint_path is not None:
        save_bc(checkpoint_path, model, stats, train_cfg)
    _write_log(log_path, rows)
    return model, result


# ---------------------------------------------------------------------------
# checkpoint wrappers (model kind + config + normalization in the JSON blob)
# ---------------------------------------------------------------------------


def save_denoiser(path, model: Denoiser, stats: NormStats, train_cfg: TrainConfig) -> None:
    save_checkpoint(path, model.store, {
        "kind": "denoiser",
        "variant": train_cfg.variant,
        "model": model.config.to_dict(),
        "norm_stats": stats.to_dict(),
        "schedule_kind": train_cfg.schedule_kind,
        "seed": train_cfg.seed,
    })


def save_bc(path, model: BCBaseline, stats: NormStats, train_cfg: TrainConfig) -> None:
    save_checkpoint(path, model.store, {
        "kind": "bc",
        "variant": "bc",
        "model": model.config.to_dict(),
        "norm_stats": stats.to_dict(),
        "seed": train_cfg.seed,
    })


def load_policy(path):
    """Load any checkpoint; returns (model, stats, config_dict). The model is
    a Denoiser or a BCBaseline depending on the stored kind."""
    store, cfg = load_checkpoint(path)
    stats = NormStats.from_dict(cfg["norm_stats"])
    model_cfg = ModelConfig.from_dict(cfg["model"])
    if cfg["kind"] == "denoiser":
        return Denoiser(model_cfg, store=store), stats, cfg
    if cfg["kind"] == "bc":
        return BCBaseline(model_cfg, store=store), stats, cfg
    raise ValueError(f"unknown checkpoint kind {cfg.get('kind')!r}")
