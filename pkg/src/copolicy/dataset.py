"""Episode records, newline-delimited JSON dataset files, exact replay, and
assembly of plan-rate training windows.

Episodes are stored at the 30 Hz simulator rate. Applied actions are
quantized to 9 significant digits when recorded, which makes the decimal
serialization lossless: an episode loaded from disk replays through the
simulator to the exact stored state sequence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .maps import MapConfig, map_from_dict, map_to_dict
from .obs import encode_obs
from .sim import JointAction, PhysicsParams, TableState, quantize, step

FORMAT_VERSION = 1

PLAN_STRIDE = 3  # simulator ticks per plan-rate step (30 Hz -> 10 Hz)

SOURCE_SYNTHETIC = "synthetic_demo"
SOURCE_POLICY_EVAL = "policy_eval"
SOURCE_HIL = "hil"

TERMINAL_EVENTS = ("goal_reached", "collision_obstacle", "collision_wall", "timeout")


def quantize_action(a: JointAction, digits: int = 9) -> JointAction:
    return JointAction(
        quantize(a.human_fx, digits), quantize(a.human_fy, digits),
        quantize(a.robot_fx, digits), quantize(a.robot_fy, digits),
    )


@dataclass
class EpisodeRecord:
    """One rollout: 30 Hz states and actions plus the terminal outcome."""

    map: MapConfig
    states: list[TableState]
    actions: list[JointAction]
    outcome: str
    source: str
    seed: int
    plan_ms: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.actions) != len(self.states) - 1:
            raise ValueError(
                f"episode {self.map.map_id}: {len(self.actions)} actions for "
                f"{len(self.states)} states (want states-1)"
            )
        if self.outcome not in TERMINAL_EVENTS:
            raise ValueError(f"bad outcome {self.outcome!r}")

    @property
    def n_ticks(self) -> int:
        return len(self.actions)

    def duration_s(self, params: PhysicsParams) -> float:
        return self.n_ticks * params.dt_sim

    def success(self) -> bool:
        return self.outcome == "goal_reached"


def replay(record: EpisodeRecord, params: PhysicsParams) -> list[TableState]:
    """Re-simulate the stored actions from the stored initial state.

    Actions are sufficient statistics of a trajectory: for any record
    produced by this package the result is bit-identical to record.states.
    """
    states = [record.states[0]]
    for a in record.actions:
        states.append(step(states[-1], a, params, record.map).next_state)
    return states


# ---------------------------------------------------------------------------
# NDJSON files: header line, then one episode per line
# ---------------------------------------------------------------------------


def _fmt(v: float) -> float:
    return quantize(v, 9)


def _state_row(s: TableState) -> list[float]:
    return [_fmt(s.x), _fmt(s.y), _fmt(s.theta), _fmt(s.vx), _fmt(s.vy), _fmt(s.omega)]


def episode_to_dict(ep: EpisodeRecord) -> dict:
    return {
        "map": map_to_dict(ep.map),
        "states": [_state_row(s) for s in ep.states],
        "actions": [
            [_fmt(a.human_fx), _fmt(a.human_fy), _fmt(a.robot_fx), _fmt(a.robot_fy)]
            for a in ep.actions
        ],
        "outcome": ep.outcome,
        "source": ep.source,
        "seed": ep.seed,
    }


def episode_from_dict(d: dict) -> EpisodeRecord:
    return EpisodeRecord(
        map=map_from_dict(d["map"]),
        states=[TableState(*row) for row in d["states"]],
        actions=[JointAction(*row) for row in d["actions"]],
        outcome=d["outcome"],
        source=d["source"],
        seed=d["seed"],
    )


def save_dataset(path, episodes: list[EpisodeRecord], params: PhysicsParams,
                 generator_seed: int | None = None) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "physics": params.to_dict(),
        "generator_seed": generator_seed,
        "n_episodes": len(episodes),
    }
    with open(path, "w") as f:
        f.write(json.dumps(header) + "\n")
        for ep in episodes:
            for a in ep.actions:
                if quantize_action(a) != a:
                    raise ValueError(
                        f"episode {ep.map.map_id}: actions were not quantized at "
                        "record time; the file would not replay exactly"
                    )
            f.write(json.dumps(episode_to_dict(ep)) + "\n")


def load_dataset(path, verify: bool = True) -> tuple[list[EpisodeRecord], PhysicsParams, dict]:
    """Load a dataset file, reconstructing full-precision state sequences.

    States are stored with 9 significant digits, but the initial state and
    the (quantized) actions round-trip exactly, so replaying them recovers
    the original trajectory bit for bit. With verify=True every stored state
    row is checked against the reconstruction's formatting.
    """
    with open(path) as f:
        header = json.loads(f.readline())
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported dataset format_version {header.get('format_version')}")
        params = PhysicsParams.from_dict(header["physics"])
        episodes = []
        for line in f:
            if not line.strip():
                continue
            ep = episode_from_dict(json.loads(line))
            stored = ep.states
            ep.states = [stored[0]]
            ep.states = replay(ep, params)
            if verify:
                for got, want in zip(ep.states, stored):
                    if _state_row(got) != _state_row(want):
                        raise ValueError(
                            f"episode {ep.map.map_id}: stored states do not match "
                            "the replay of the stored actions"
                        )
            episodes.append(ep)
    return episodes, params, header


# ---------------------------------------------------------------------------
# Plan-rate (10 Hz) training windows
# ---------------------------------------------------------------------------


@dataclass
class WindowSet:
    """Flat arrays of training windows at the plan rate.

    obs:      (n, t_obs, 19)   raw (unnormalized) observations
    human:    (n, t_obs, 2)    past human actions, most recent last
    target:   (n, t_pred, 4)   joint actions from the current plan step on
    valid:    (n, t_obs)       False where the history was padded
    """

    obs: np.ndarray
    human: np.ndarray
    target: np.ndarray
    valid: np.ndarray


def plan_rate_series(ep: EpisodeRecord, params: PhysicsParams):
    """Downsample one episode to the plan rate.

    Observations are taken every PLAN_STRIDE ticks; actions are averaged
    over each 3-tick bin, which is what a zero-order hold at the plan rate
    would have to reproduce.
    """
    n_plan = ep.n_ticks // PLAN_STRIDE
    if n_plan == 0:
        return None
    obs = np.stack([encode_obs(ep.states[i * PLAN_STRIDE], ep.map) for i in range(n_plan)])
    acts = np.asarray(
        [[a.human_fx, a.human_fy, a.robot_fx, a.robot_fy] for a in ep.actions],
        dtype=np.float64,
    )
    binned = acts[: n_plan * PLAN_STRIDE].reshape(n_plan, PLAN_STRIDE, 4).mean(axis=1)
    return obs, binned


def build_windows(episodes: list[EpisodeRecord], params: PhysicsParams,
                  t_obs: int, t_pred: int) -> WindowSet:
    """One window per plan step of every episode.

    History shorter than t_obs repeats the first observation with zeroed
    human actions (flagged invalid); targets past the episode end are zero
    forces — the episodes end at the goal, so the continuation that a
    receding-horizon policy should learn there is "stop".
    """
    obs_list, hum_list, tgt_list, val_list = [], [], [], []
    for ep in episodes:
        series = plan_rate_series(ep, params)
        if series is None:
            continue
        obs, acts = series
        n = obs.shape[0]
        for t in range(n):
            w_obs = np.empty((t_obs, obs.shape[1]))
            w_hum = np.zeros((t_obs, 2))
            w_val = np.zeros(t_obs, dtype=bool)
            for j in range(t_obs):
                src = t - (t_obs - 1 - j)
                if src >= 0:
                    w_obs[j] = obs[src]
                    w_val[j] = True
                    if src >= 1:
                        w_hum[j] = acts[src - 1, :2]
                else:
                    w_obs[j] = obs[0]
            future = np.arange(t, t + t_pred)
            tgt = np.zeros((t_pred, acts.shape[1]))
            inside = future < n
            tgt[inside] = acts[future[inside]]
            obs_list.append(w_obs)
            hum_list.append(w_hum)
            tgt_list.append(tgt)
            val_list.append(w_val)
    if not obs_list:
        raise ValueError("dataset too small to form a single training window")
    return WindowSet(
        obs=np.stack(obs_list),
        human=np.stack(hum_list),
        target=np.stack(tgt_list),
        valid=np.stack(val_list),
    )


def all_obs_ticks(episodes: list[EpisodeRecord]) -> np.ndarray:
    """Every 30 Hz observation of every episode, for normalization statistics."""
    rows = []
    for ep in episodes:
        for s in ep.states:
            rows.append(encode_obs(s, ep.map))
    return np.stack(rows)
