"""Fixed-size observation encoding and dataset normalization statistics.

The observation packs the table state together with map context into a flat
length-19 vector: pose (with the angle as cos/sin), twist, three obstacle
slots, the initial pose, and the goal. Unused obstacle slots hold an
out-of-world sentinel so zero- and three-obstacle maps share one layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .maps import MapConfig, MapError, MAX_OBSTACLES
from .sim import TableState

OBS_DIM = 19
ACTION_DIM = 4
HUMAN_ACTION_DIM = 2

OBSTACLE_SENTINEL = (-10.0, -10.0)

OBS_FIELDS = (
    "x", "y", "cos_theta", "sin_theta", "vx", "vy", "omega",
    "obs1_x", "obs1_y", "obs2_x", "obs2_y", "obs3_x", "obs3_y",
    "init_x", "init_y", "cos_init_theta", "sin_init_theta",
    "goal_x", "goal_y",
)


def encode_obs(state: TableState, map_cfg: MapConfig) -> np.ndarray:
    """Encode one tick into the flat observation vector (float64, length 19).

    Obstacles are slotted in (x, then y) order so the encoding does not
    depend on the order obstacles were listed in the map.
    """
    if len(map_cfg.obstacles) > MAX_OBSTACLES:
        raise MapError(f"map {map_cfg.map_id!r} has more than {MAX_OBSTACLES} obstacles")
    out = np.empty(OBS_DIM, dtype=np.float64)
    out[0] = state.x
    out[1] = state.y
    out[2] = math.cos(state.theta)
    out[3] = math.sin(state.theta)
    out[4] = state.vx
    out[5] = state.vy
    out[6] = state.omega
    slots = list(map_cfg.sorted_obstacles())
    for i in range(MAX_OBSTACLES):
        if i < len(slots):
            out[7 + 2 * i] = slots[i].x
            out[8 + 2 * i] = slots[i].y
        else:
            out[7 + 2 * i], out[8 + 2 * i] = OBSTACLE_SENTINEL
    ix, iy, ith = map_cfg.initial_pose
    out[13] = ix
    out[14] = iy
    out[15] = math.cos(ith)
    out[16] = math.sin(ith)
    out[17], out[18] = map_cfg.goal
    return out


@dataclass
class NormStats:
    """Per-dimension observation mean/scale plus the action scale (f_max)."""

    obs_mean: np.ndarray
    obs_scale: np.ndarray
    action_scale: float

    SCALE_FLOOR = 1e-6

    def apply_obs(self, obs: np.ndarray) -> np.ndarray:
        return (obs - self.obs_mean) / self.obs_scale

    def invert_obs(self, z: np.ndarray) -> np.ndarray:
        return z * self.obs_scale + self.obs_mean

    def apply_action(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a, dtype=np.float64) / self.action_scale

    def invert_action(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.action_scale

    def to_dict(self) -> dict:
        return {
            "obs_mean": self.obs_mean.tolist(),
            "obs_scale": self.obs_scale.tolist(),
            "action_scale": self.action_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(
            obs_mean=np.asarray(d["obs_mean"], dtype=np.float64),
            obs_scale=np.asarray(d["obs_scale"], dtype=np.float64),
            action_scale=float(d["action_scale"]),
        )


def fit_norm_stats(obs_matrix: np.ndarray, action_scale: float) -> NormStats:
    """Mean and standard deviation per observation dimension over all ticks.

    Scales are floored so constant dimensions normalize to zero instead of
    dividing by zero.
    """
    obs_matrix = np.asarray(obs_matrix, dtype=np.float64)
    if obs_matrix.ndim != 2 or obs_matrix.shape[0] == 0:
        raise ValueError("need a non-empty (ticks, obs_dim) matrix")
    mean = obs_matrix.mean(axis=0)
    scale = np.maximum(obs_matrix.std(axis=0), NormStats.SCALE_FLOOR)
    return NormStats(obs_mean=mean, obs_scale=scale, action_scale=float(action_scale))
