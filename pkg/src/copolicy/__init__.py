"""Diffusion co-policy for two-agent table carrying: simulation, synthetic
demonstrations, training, receding-horizon runtime, metrics, and a live
teleoperation server."""

from .maps import MapConfig, Obstacle, builtin_suite
from .sim import JointAction, PhysicsParams, StepOutcome, TableState, step
from .obs import NormStats, encode_obs
from .dataset import EpisodeRecord, load_dataset, replay, save_dataset
from .demos import generate_demos
from .schedule import NoiseSchedule, make_schedule
from .diffusion import ActionLatent, forward_noise, reverse_step, sample
from .denoiser import BCBaseline, ConditioningWindow, Denoiser, ModelConfig
from .training import TrainConfig, load_policy, train_bc, train_denoiser
from .runtime import RuntimeConfig, ScriptedPartner, evaluate_suite, run_episode
from .metrics import interaction_force, bin_interaction_forces, visitation_heatmap

__version__ = "0.1.0"

__all__ = [
    "ActionLatent", "BCBaseline", "ConditioningWindow", "Denoiser",
    "EpisodeRecord", "JointAction", "MapConfig", "ModelConfig", "NoiseSchedule",
    "NormStats", "Obstacle", "PhysicsParams", "RuntimeConfig", "ScriptedPartner",
    "StepOutcome", "TableState", "TrainConfig", "bin_interaction_forces",
    "builtin_suite", "encode_obs", "evaluate_suite", "forward_noise",
    "generate_demos", "interaction_force", "load_dataset", "load_policy",
    "make_schedule", "replay", "reverse_step", "run_episode", "sample",
    "save_dataset", "step", "train_bc", "train_denoiser", "visitation_heatmap",
]
