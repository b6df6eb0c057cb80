"""Deterministic 2D rigid-body simulation of a table carried by two agents.

The table is a single rigid rectangle. Each agent applies a planar force at
one of the two short ends; the net force and the lever-arm moments drive a
semi-implicit Euler update at a fixed 30 Hz tick. Everything here is pure
float arithmetic on value types, so identical inputs give bit-identical
outputs and calls are safe from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .maps import MapConfig, Obstacle

TWO_PI = 2.0 * math.pi

EVENT_NONE = "none"
EVENT_COLLISION_OBSTACLE = "collision_obstacle"
EVENT_COLLISION_WALL = "collision_wall"
EVENT_GOAL = "goal_reached"
EVENT_TIMEOUT = "timeout"  # assigned by episode drivers, never by step()


class MalformedStateError(ValueError):
    """Raised when a state or action contains non-finite values."""


@dataclass(frozen=True)
class TableState:
    """Pose and twist of the table center. theta is wrapped to [0, 2*pi)."""

    x: float
    y: float
    theta: float
    vx: float
    vy: float
    omega: float

    def is_finite(self) -> bool:
        return all(map(math.isfinite, (self.x, self.y, self.theta, self.vx, self.vy, self.omega)))


@dataclass(frozen=True)
class JointAction:
    """World-frame forces applied at the human end and the robot end (N)."""

    human_fx: float
    human_fy: float
    robot_fx: float
    robot_fy: float

    def is_finite(self) -> bool:
        return all(map(math.isfinite, (self.human_fx, self.human_fy, self.robot_fx, self.robot_fy)))

    def clipped(self, f_max: float) -> "JointAction":
        c = lambda v: min(f_max, max(-f_max, v))
        return JointAction(c(self.human_fx), c(self.human_fy), c(self.robot_fx), c(self.robot_fy))


ZERO_ACTION = JointAction(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class PhysicsParams:
    """World constants. dt is the exact rational dt_num/dt_den (1/30 by default)."""

    table_length: float = 1.2
    table_width: float = 0.3
    mass: float = 2.0
    moment_of_inertia: float = 2.0 * (1.2**2 + 0.3**2) / 12.0
    linear_damping: float = 1.2
    angular_damping: float = 0.4
    f_max: float = 1.0
    dt_num: int = 1
    dt_den: int = 30
    world_width: float = 12.0
    world_height: float = 8.0
    goal_radius: float = 0.3

    @property
    def dt_sim(self) -> float:
        return self.dt_num / self.dt_den

    def __post_init__(self):
        positive = (
            self.table_length, self.table_width, self.mass, self.moment_of_inertia,
            self.linear_damping, self.angular_damping, self.f_max,
            self.world_width, self.world_height, self.goal_radius,
        )
        if not all(v > 0 for v in positive) or self.dt_num <= 0 or self.dt_den <= 0:
            raise ValueError("all physics parameters must be strictly positive")

    def to_dict(self) -> dict:
        return {
            "table_length": self.table_length,
            "table_width": self.table_width,
            "mass": self.mass,
            "moment_of_inertia": self.moment_of_inertia,
            "linear_damping": self.linear_damping,
            "angular_damping": self.angular_damping,
            "f_max": self.f_max,
            "dt": [self.dt_num, self.dt_den],
            "world_width": self.world_width,
            "world_height": self.world_height,
            "goal_radius": self.goal_radius,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhysicsParams":
        d = dict(d)
        num, den = d.pop("dt")
        return cls(dt_num=num, dt_den=den, **d)


@dataclass(frozen=True)
class StepOutcome:
    next_state: TableState
    event: str  # EVENT_NONE / EVENT_COLLISION_* / EVENT_GOAL


def wrap_angle(theta: float) -> float:
    """Wrap to [0, 2*pi)."""
    t = math.fmod(theta, TWO_PI)
    return t + TWO_PI if t < 0.0 else t


def quantize(v: float, digits: int = 9) -> float:
    """Round to `digits` significant decimal digits (decimal-stable)."""
    if v == 0.0 or not math.isfinite(v):
        return v
    return float(f"{v:.{digits}g}")


def attachment_points(state: TableState, params: PhysicsParams):
    """World positions of the human end (-L/2 in the body frame) and robot end (+L/2)."""
    c, s = math.cos(state.theta), math.sin(state.theta)
    hx = 0.5 * params.table_length
    return (state.x - c * hx, state.y - s * hx), (state.x + c * hx, state.y + s * hx)


def footprint_corners(state: TableState, params: PhysicsParams):
    """The four corners of the L x W table rectangle, world frame."""
    c, s = math.cos(state.theta), math.sin(state.theta)
    hl, hw = 0.5 * params.table_length, 0.5 * params.table_width
    ax, ay = c * hl, s * hl  # body x-axis, half length
    bx, by = -s * hw, c * hw  # body y-axis, half width
    return (
        (state.x + ax + bx, state.y + ay + by),
        (state.x + ax - bx, state.y + ay - by),
        (state.x - ax - bx, state.y - ay - by),
        (state.x - ax + bx, state.y - ay + by),
    )


def table_overlaps_square(state: TableState, params: PhysicsParams, ob: Obstacle) -> bool:
    """Separating-axis overlap test: oriented table rectangle vs axis-aligned square.

    Candidate axes are the two world axes and the two table axes; if the
    projected intervals overlap on all four, the rectangles intersect.
    """
    c, s = math.cos(state.theta), math.sin(state.theta)
    hl, hw = 0.5 * params.table_length, 0.5 * params.table_width
    dx, dy = ob.x - state.x, ob.y - state.y
    hs = ob.half()

    # world x/y axes: table projection is |c|*hl + |s|*hw etc.
    if abs(dx) > hl * abs(c) + hw * abs(s) + hs:
        return False
    if abs(dy) > hl * abs(s) + hw * abs(c) + hs:
        return False
    # table axes: square projection is hs*(|ux|+|uy|) for unit axis (ux, uy)
    if abs(dx * c + dy * s) > hl + hs * (abs(c) + abs(s)):
        return False
    if abs(-dx * s + dy * c) > hw + hs * (abs(s) + abs(c)):
        return False
    return True


def check_collision(state: TableState, params: PhysicsParams, map_cfg: MapConfig) -> str:
    """Obstacle overlap (separating axis) and wall test (any corner out of bounds)."""
    for cx, cy in footprint_corners(state, params):
        if not (0.0 <= cx <= params.world_width and 0.0 <= cy <= params.world_height):
            return EVENT_COLLISION_WALL
    for ob in map_cfg.obstacles:
        if table_overlaps_square(state, params, ob):
            return EVENT_COLLISION_OBSTACLE
    return EVENT_NONE


def step(state: TableState, action: JointAction, params: PhysicsParams,
         map_cfg: MapConfig) -> StepOutcome:
    """Advance one tick: velocities first (semi-implicit Euler), then pose.

    Collision is reported in preference to goal arrival when both fire on
    the same tick.
    """
    if not state.is_finite() or not action.is_finite():
        raise MalformedStateError("non-finite state or action")

    dt = params.dt_sim
    m, inertia = params.mass, params.moment_of_inertia

    fx = action.human_fx + action.robot_fx - params.linear_damping * state.vx
    fy = action.human_fy + action.robot_fy - params.linear_damping * state.vy

    # lever arms to the attachment points: r_H = -r_R = -(L/2) * axis
    c, s = math.cos(state.theta), math.sin(state.theta)
    rx, ry = c * 0.5 * params.table_length, s * 0.5 * params.table_length
    torque = (
        (-rx) * action.human_fy - (-ry) * action.human_fx
        + rx * action.robot_fy - ry * action.robot_fx
        - params.angular_damping * state.omega
    )

    vx = state.vx + dt * fx / m
    vy = state.vy + dt * fy / m
    omega = state.omega + dt * torque / inertia

    nxt = TableState(
        x=state.x + dt * vx,
        y=state.y + dt * vy,
        theta=wrap_angle(state.theta + dt * omega),
        vx=vx, vy=vy, omega=omega,
    )

    event = check_collision(nxt, params, map_cfg)
    if event == EVENT_NONE:
        gx, gy = map_cfg.goal
        if (nxt.x - gx) ** 2 + (nxt.y - gy) ** 2 <= params.goal_radius**2:
            event = EVENT_GOAL
    return StepOutcome(next_state=nxt, event=event)


def initial_state(map_cfg: MapConfig) -> TableState:
    """Starting state of an episode. Fields are quantized to 9 significant
    digits so recorded trajectories replay exactly after decimal
    serialization (the wrapped angle of, say, pi is not decimal-stable)."""
    x, y, theta = map_cfg.initial_pose
    return TableState(quantize(x), quantize(y), quantize(wrap_angle(theta)),
                      0.0, 0.0, 0.0)


def kinetic_energy(state: TableState, params: PhysicsParams) -> float:
    return 0.5 * params.mass * (state.vx**2 + state.vy**2) \
        + 0.5 * params.moment_of_inertia * state.omega**2
