"""Run configuration: a TOML file of flat sections with command-line
overrides. Unknown keys are rejected; every artifact-producing command
writes the fully resolved tree next to its outputs."""

from __future__ import annotations

import hashlib
import os
import time
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .denoiser import ModelConfig
from .sim import PhysicsParams
from .training import TrainConfig


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict] = {
    "seed": 0,
    "physics": {
        "table_length": 1.2,
        "table_width": 0.3,
        "mass": 2.0,
        "moment_of_inertia": 2.0 * (1.2**2 + 0.3**2) / 12.0,
        "linear_damping": 1.2,
        "angular_damping": 0.4,
        "f_max": 1.0,
        "world_width": 12.0,
        "world_height": 8.0,
        "goal_radius": 0.3,
    },
    "dataset": {
        "n_per_mode": 6,
    },
    "model": {
        "n_layers": 4,
        "n_heads": 4,
        "d_model": 128,
        "d_ff": 512,
        "dropout": 0.1,
        "t_obs": 4,
        "t_pred": 16,
        "diffusion_steps": 100,
    },
    "train": {
        "steps": 30000,
        "batch_size": 64,
        "lr": 1e-4,
        "lr_min_fraction": 0.1,
        "weight_decay": 1e-4,
        "grad_clip": 1.0,
        "schedule_kind": "cosine",
        "log_every": 1,
        "checkpoint_every": 0,
    },
    "runtime": {
        "coplan_t_action": 8,
        "coplan_inference_steps": 100,
        "reactive_inference_steps": 34,
        "timeout_ticks": 1800,
        "seeds_per_map": 3,
        "batched": True,
    },
    "metrics": {
        "grid_nx": 60,
        "grid_ny": 40,
    },
    "server": {
        "host": "127.0.0.1",
        "port": 8765,
        "staleness_ms": 200.0,
        "countdown_s": 1.0,
        "max_episode_s": 60.0,
    },
}

RUN_ROOT_ENV = "COPOLICY_RUN_ROOT"


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where!r} must be a table")
            out[key] = _merge(base[key], val, where)
        else:
            if isinstance(val, dict):
                raise ConfigError(f"{where!r} must be a value, not a table")
            out[key] = _coerce(base[key], val, where)
    return out


def _coerce(default, val, where: str):
    if isinstance(default, bool):
        if not isinstance(val, bool):
            raise ConfigError(f"{where!r} must be a boolean")
        return val
    if isinstance(default, float) and isinstance(val, (int, float)):
        return float(val)
    if isinstance(default, int) and isinstance(val, int):
        return val
    if isinstance(default, str) and isinstance(val, str):
        return val
    raise ConfigError(f"{where!r} has wrong type {type(val).__name__}")


def load_config(path=None, overrides: list[str] | None = None) -> dict:
    """Load TOML config (or defaults), then apply key.path=value overrides."""
    cfg = DEFAULTS
    if path is not None:
        with open(path, "rb") as f:
            data = tomllib.load(f)
        cfg = _merge(DEFAULTS, data)
    else:
        cfg = _merge(DEFAULTS, {})
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key.path=value")
        key, _, raw = item.partition("=")
        node = cfg
        parts = key.strip().split(".")
        try:
            parsed = tomllib.loads(f"v = {raw.strip()}")["v"]
        except tomllib.TOMLDecodeError:
            parsed = raw.strip()  # bare string
        patch: dict = {parts[-1]: parsed}
        for p in reversed(parts[:-1]):
            patch = {p: patch}
        cfg = _merge(cfg, patch)
    return cfg


def dump_toml(cfg: dict) -> str:
    lines = []
    for key, val in cfg.items():
        if not isinstance(val, dict):
            lines.append(f"{key} = {_toml_value(val)}")
    for section, table in cfg.items():
        if isinstance(table, dict):
            lines.append("")
            lines.append(f"[{section}]")
            for key, val in table.items():
                lines.append(f"{key} = {_toml_value(val)}")
    return "\n".join(lines) + "\n"


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    return '"' + str(v).replace("\\", "\\\\").replace('"', '\\"') + '"'


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(dump_toml(cfg).encode()).hexdigest()[:10]


def make_run_dir(cfg: dict, label: str, root=None) -> Path:
    root = Path(root or os.environ.get(RUN_ROOT_ENV, "runs"))
    stamp = time.strftime("%Y%m%d-%H%M%S")
    run = root / f"{stamp}-{label}-{config_hash(cfg)}"
    run.mkdir(parents=True, exist_ok=True)
    (run / "resolved.toml").write_text(dump_toml(cfg))
    return run


# ---------------------------------------------------------------------------
# typed views
# ---------------------------------------------------------------------------


def physics_params(cfg: dict) -> PhysicsParams:
    return PhysicsParams(**cfg["physics"])


def model_config(cfg: dict, variant: str = "codp_h") -> ModelConfig:
    return ModelConfig(condition_on_human=(variant == "codp_h"), **cfg["model"])


def train_config(cfg: dict, variant: str) -> TrainConfig:
    return TrainConfig(variant=variant, seed=cfg["seed"], **cfg["train"])
