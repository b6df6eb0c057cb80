"""Synthetic multimodal demonstrations.

Stands in for a human-human demonstration corpus: for every map we
enumerate route modes (pass above or below each obstacle), lay a via-point
path per mode, and roll out two independently-jittered PD force controllers
that drag the table along the path. Gaussian force noise and short random
impulses give the rollouts the messy, impulse-heavy texture of human play;
only goal-reaching rollouts are kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import EpisodeRecord, SOURCE_SYNTHETIC, quantize_action
from .maps import MapConfig, Obstacle
from .sim import (
    EVENT_GOAL,
    EVENT_NONE,
    JointAction,
    PhysicsParams,
    attachment_points,
    initial_state,
    step,
)


class GenerationError(RuntimeError):
    """No route mode of a map produced a successful rollout."""


# controller constants (base values; per-agent gains are jittered per episode)
KP = 2.6
KD = 1.7
CRUISE_SPEED = 0.58
LEAD_DISTANCE = 0.5
TURN_RATE = 0.9          # rad/s cap on the virtual table's orientation target
NOISE_SIGMA = 0.1        # x f_max, per force component per tick
IMPULSE_MEAN_PERIOD = 3.0  # seconds between impulses per agent
IMPULSE_TICKS = 2
IMPULSE_MAGNITUDE = 0.5  # x f_max
GAIN_JITTER = 0.2
MAX_ATTEMPTS_PER_MODE = 50
TIMEOUT_TICKS = 1800

VIA_CLEARANCE = 0.95     # path distance from obstacle edge
VIA_HALF_SPAN = 0.5      # flat segment half-length alongside an obstacle
EARLY_COMMIT_DIST = 1.6  # x distance from start to the first route via
GOAL_FUNNEL_DIST = 1.8   # straight final leg into the goal (m)
BRAKE_DISTANCE = 0.8     # final-approach deceleration zone (m)
BRAKE_FLOOR = 0.5        # fraction of cruise speed kept at the goal
MAX_BAND_JUMP = 2.6      # max via-height change between consecutive obstacles


@dataclass
class Path:
    """Arc-length parametrized polyline."""

    points: np.ndarray  # (n, 2)
    cum: np.ndarray     # (n,) cumulative arc length

    @classmethod
    def from_points(cls, pts) -> "Path":
        points = np.asarray(pts, dtype=np.float64)
        seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        return cls(points=points, cum=cum)

    @property
    def length(self) -> float:
        return float(self.cum[-1])

    def point_at(self, s: float):
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.points) - 2)
        seg_len = self.cum[i + 1] - self.cum[i]
        f = 0.0 if seg_len == 0 else (s - self.cum[i]) / seg_len
        p = self.points[i] * (1 - f) + self.points[i + 1] * f
        return float(p[0]), float(p[1])

    def tangent_at(self, s: float) -> float:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.points) - 2)
        d = self.points[i + 1] - self.points[i]
        return math.atan2(float(d[1]), float(d[0]))


def route_modes(map_cfg: MapConfig) -> list[tuple[str, ...]]:
    """All above/below assignments, one choice per obstacle in x order."""
    n = len(map_cfg.obstacles)
    if n == 0:
        return [()]
    modes = []
    for bits in range(2**n):
        modes.append(tuple("above" if (bits >> i) & 1 else "below" for i in range(n)))
    return modes


def build_route(map_cfg: MapConfig, mode: tuple[str, ...],
                params: PhysicsParams) -> Path | None:
    """Via-point path for one mode, or None if it is geometrically infeasible.

    The first via sits close to the start so that rollouts commit to their
    route mode early; trajectories in different modes then separate within
    the first second or two, which keeps the mode identifiable from a short
    observation history.
    """
    x0, y0, _ = map_cfg.initial_pose
    pts = [(x0, y0)]
    obstacles = sorted(map_cfg.obstacles, key=lambda o: o.x)
    prev_vy = None
    for i, (ob, choice) in enumerate(zip(obstacles, mode)):
        off = ob.half() + VIA_CLEARANCE
        vy = ob.y + off if choice == "above" else ob.y - off
        # a pair of carriers cannot dash between far-apart bands mid-slalom;
        # such zigzag assignments are treated as infeasible modes
        if prev_vy is not None and abs(vy - prev_vy) > MAX_BAND_JUMP:
            return None
        prev_vy = vy
        if i == 0:
            pts.append((x0 + EARLY_COMMIT_DIST, vy))
        pts.append((ob.x - VIA_HALF_SPAN, vy))
        pts.append((ob.x + VIA_HALF_SPAN, vy))
    gx, gy = map_cfg.goal
    # shared straight funnel into the goal so every mode ends the same way
    if abs(gx - x0) > GOAL_FUNNEL_DIST:
        pts.append((gx - math.copysign(GOAL_FUNNEL_DIST, gx - x0), gy))
    pts.append((gx, gy))
    path = Path.from_points(pts)

    margin = 0.5 * params.table_width + 0.2
    samples = max(2, int(path.length / 0.05))
    for k in range(samples + 1):
        px, py = path.point_at(path.length * k / samples)
        if not (margin <= px <= params.world_width - margin
                and margin <= py <= params.world_height - margin):
            return None
        for ob in obstacles:
            cheb = max(abs(px - ob.x), abs(py - ob.y)) - ob.half()
            if cheb < 0.5 * params.table_width + 0.25:
                return None
    return path


def _nearest_mod_pi(ref: float, ang: float) -> float:
    """Representative of `ang` modulo pi closest to `ref`."""
    k = round((ref - ang) / math.pi)
    return ang + k * math.pi


@dataclass
class _Agent:
    kp: float
    kd: float
    impulse_left: int = 0
    impulse_fx: float = 0.0
    impulse_fy: float = 0.0


def _pd_force(agent: _Agent, px, py, vx, vy, tx, ty, tvx, tvy, f_max):
    fx = agent.kp * (tx - px) + agent.kd * (tvx - vx)
    fy = agent.kp * (ty - py) + agent.kd * (tvy - vy)
    return fx, fy


def rollout_scripted_pair(map_cfg: MapConfig, path: Path, params: PhysicsParams,
                          rng: np.random.Generator, noise_sigma: float = NOISE_SIGMA,
                          impulses: bool = True, gain_jitter: float = GAIN_JITTER,
                          timeout_ticks: int = TIMEOUT_TICKS):
    """Roll two noisy PD controllers tracking `path`. Returns (states, actions, outcome)."""
    dt = params.dt_sim
    f_max = params.f_max
    state = initial_state(map_cfg)
    agents = [
        _Agent(kp=KP * (1 + gain_jitter * rng.uniform(-1, 1)),
               kd=KD * (1 + gain_jitter * rng.uniform(-1, 1)))
        for _ in range(2)
    ]
    s_prog = 0.0
    psi = state.theta  # orientation target, continuous (not wrapped)
    states = [state]
    actions: list[JointAction] = []
    outcome = "timeout"
    impulse_rate = dt / IMPULSE_MEAN_PERIOD

    for _ in range(timeout_ticks):
        # advance the virtual carried table along the path, carrot style,
        # slowing down through the final-approach brake zone
        remaining = path.length - s_prog
        speed_cmd = CRUISE_SPEED * max(BRAKE_FLOOR, min(1.0, remaining / BRAKE_DISTANCE))
        cx, cy = path.point_at(s_prog)
        if math.hypot(cx - state.x, cy - state.y) < LEAD_DISTANCE:
            s_prog = min(s_prog + speed_cmd * dt, path.length)
            cx, cy = path.point_at(s_prog)
        phi = path.tangent_at(s_prog)
        dpsi = _nearest_mod_pi(psi, phi) - psi
        psi += max(-TURN_RATE * dt, min(TURN_RATE * dt, dpsi))

        final_approach = s_prog >= path.length - 1e-9
        if final_approach:
            tvx = tvy = 0.0
        else:
            tvx, tvy = speed_cmd * math.cos(phi), speed_cmd * math.sin(phi)

        # target attachment points of the virtual table
        hx = 0.5 * params.table_length
        tc, ts = math.cos(psi), math.sin(psi)
        targets = ((cx - tc * hx, cy - ts * hx), (cx + tc * hx, cy + ts * hx))

        (phx, phy), (prx, pry) = attachment_points(state, params)
        apoints = ((phx, phy), (prx, pry))
        forces = []
        for i, agent in enumerate(agents):
            px, py = apoints[i]
            # attachment-point velocity includes the rotational term
            rx, ry = px - state.x, py - state.y
            avx = state.vx - state.omega * ry
            avy = state.vy + state.omega * rx
            fx, fy = _pd_force(agent, px, py, avx, avy, *targets[i], tvx, tvy, f_max)
            fx += noise_sigma * f_max * rng.standard_normal()
            fy += noise_sigma * f_max * rng.standard_normal()
            if impulses:
                if agent.impulse_left == 0 and rng.random() < impulse_rate:
                    ang = rng.uniform(0.0, 2.0 * math.pi)
                    agent.impulse_left = IMPULSE_TICKS
                    agent.impulse_fx = IMPULSE_MAGNITUDE * f_max * math.cos(ang)
                    agent.impulse_fy = IMPULSE_MAGNITUDE * f_max * math.sin(ang)
                if agent.impulse_left > 0:
                    fx += agent.impulse_fx
                    fy += agent.impulse_fy
                    agent.impulse_left -= 1
            forces.append((fx, fy))

        action = quantize_action(
            JointAction(forces[0][0], forces[0][1], forces[1][0], forces[1][1]).clipped(f_max)
        )
        out = step(state, action, params, map_cfg)
        states.append(out.next_state)
        actions.append(action)
        state = out.next_state
        if out.event != EVENT_NONE:
            outcome = out.event
            break
    return states, actions, outcome


def generate_demos(map_suite: list[MapConfig], n_per_mode: int, seed: int,
                   params: PhysicsParams | None = None) -> list[EpisodeRecord]:
    """Demonstration corpus over a map suite; deterministic for a given seed."""
    params = params or PhysicsParams()
    episodes: list[EpisodeRecord] = []
    for mi, map_cfg in enumerate(map_suite):
        got_any = False
        for qi, mode in enumerate(route_modes(map_cfg)):
            path = build_route(map_cfg, mode, params)
            if path is None:
                continue
            kept = 0
            for attempt in range(MAX_ATTEMPTS_PER_MODE):
                if kept >= n_per_mode:
                    break
                ss = np.random.SeedSequence(seed, spawn_key=(mi, qi, attempt))
                rng = np.random.default_rng(ss)
                states, acts, outcome = rollout_scripted_pair(map_cfg, path, params, rng)
                if outcome == EVENT_GOAL:
                    episodes.append(EpisodeRecord(
                        map=map_cfg, states=states, actions=acts,
                        outcome=outcome, source=SOURCE_SYNTHETIC,
                        seed=int(ss.generate_state(1)[0]),
                    ))
                    kept += 1
                    got_any = True
        if not got_any:
            raise GenerationError(f"no route mode succeeded for map {map_cfg.map_id!r}")
    return episodes


def crossing_side(ep: EpisodeRecord, obstacle: Obstacle) -> str | None:
    """'above'/'below' by table-center y where the trajectory crosses the obstacle x."""
    for a, b in zip(ep.states[:-1], ep.states[1:]):
        if (a.x - obstacle.x) * (b.x - obstacle.x) <= 0 and a.x != b.x:
            f = (obstacle.x - a.x) / (b.x - a.x)
            y = a.y * (1 - f) + b.y * f
            return "above" if y >= obstacle.y else "below"
    return None
