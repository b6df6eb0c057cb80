"""Map configurations: obstacle layouts, start pose, goal, and the built-in
train / holdout / unseen map suites.

A map is a handful of axis-aligned square obstacles plus an initial table
pose and a goal point inside a fixed rectangular world. Layout validity
(obstacle count, bounds, start/goal clearance) is checked on construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

MAX_OBSTACLES = 3


class MapError(ValueError):
    """Raised for invalid map configurations."""


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned square obstacle: center (x, y) and side length, meters."""

    x: float
    y: float
    side: float

    def half(self) -> float:
        return 0.5 * self.side

    def contains(self, px: float, py: float) -> bool:
        return abs(px - self.x) <= self.half() and abs(py - self.y) <= self.half()


@dataclass(frozen=True)
class MapConfig:
    """One task instance: obstacles, initial table pose, goal point."""

    map_id: str
    obstacles: tuple[Obstacle, ...]
    initial_pose: tuple[float, float, float]  # x, y, theta
    goal: tuple[float, float]

    def __post_init__(self):
        if len(self.obstacles) > MAX_OBSTACLES:
            raise MapError(
                f"map {self.map_id!r}: {len(self.obstacles)} obstacles exceeds the "
                f"maximum of {MAX_OBSTACLES}"
            )

    def sorted_obstacles(self) -> tuple[Obstacle, ...]:
        """Obstacles in canonical (x, then y) order, used by the observation encoding."""
        return tuple(sorted(self.obstacles, key=lambda o: (o.x, o.y)))


def validate_map(cfg: MapConfig, params) -> None:
    """Check a map against world bounds and clearance rules.

    `params` is a PhysicsParams; imported lazily to keep this module free of
    a dependency on the simulator.
    """
    from .sim import TableState, footprint_corners

    w, h = params.world_width, params.world_height
    for ob in cfg.obstacles:
        if not (ob.side > 0):
            raise MapError(f"map {cfg.map_id!r}: obstacle side must be positive")
        if (ob.x - ob.half() < 0 or ob.x + ob.half() > w
                or ob.y - ob.half() < 0 or ob.y + ob.half() > h):
            raise MapError(f"map {cfg.map_id!r}: obstacle at ({ob.x}, {ob.y}) leaves world bounds")
    x0, y0, th0 = cfg.initial_pose
    state = TableState(x0, y0, th0 % (2 * math.pi), 0.0, 0.0, 0.0)
    for cx, cy in footprint_corners(state, params):
        if not (0 <= cx <= w and 0 <= cy <= h):
            raise MapError(f"map {cfg.map_id!r}: initial footprint leaves world bounds")
    for ob in cfg.obstacles:
        if _footprint_overlaps_square(state, params, ob):
            raise MapError(f"map {cfg.map_id!r}: initial footprint overlaps an obstacle")
        if ob.contains(*cfg.goal):
            raise MapError(f"map {cfg.map_id!r}: goal lies inside an obstacle")
    gx, gy = cfg.goal
    if not (0 <= gx <= w and 0 <= gy <= h):
        raise MapError(f"map {cfg.map_id!r}: goal outside world bounds")


def _footprint_overlaps_square(state, params, ob: Obstacle) -> bool:
    from .sim import table_overlaps_square

    return table_overlaps_square(state, params, ob)


# ---------------------------------------------------------------------------
# Built-in map suites.
#
# Train and holdout layouts draw obstacles from the same six fixed slots
# (three x-columns, upper or lower position, at most one per column) so the
# holdout split probes unseen combinations of familiar obstacle placements.
# The unseen split uses off-slot obstacle positions and sizes never touched
# by demonstration generation.
# ---------------------------------------------------------------------------

_SLOT_X = (4.2, 6.0, 7.8)
_SLOT_Y = {"lo": 3.3, "hi": 4.7}
_SLOT_SIDE = 0.72

_START_X = 1.4
_GOAL_X = 10.6


def _slot(col: int, pos: str) -> Obstacle:
    return Obstacle(_SLOT_X[col], _SLOT_Y[pos], _SLOT_SIDE)


def _grid_map(map_id, slots, theta, start_y=4.0, goal_y=4.0) -> MapConfig:
    return MapConfig(
        map_id=map_id,
        obstacles=tuple(_slot(c, p) for c, p in slots),
        initial_pose=(_START_X, start_y, theta),
        goal=(_GOAL_X, goal_y),
    )


_PI = math.pi

# fmt: off
_TRAIN_SPECS = [
    ("train00", [],                               0.0,      4.0, 4.0),
    ("train01", [(1, "lo")],                      0.0,      4.0, 4.0),
    ("train02", [(1, "hi")],                      _PI,      4.0, 4.0),
    ("train03", [(0, "lo")],                      0.0,      4.4, 4.0),
    ("train04", [(2, "hi")],                      _PI / 2,  4.0, 3.6),
    ("train05", [(0, "hi"), (2, "lo")],           0.0,      4.0, 4.0),
    ("train06", [(0, "lo"), (2, "hi")],           _PI,      3.6, 4.4),
    ("train07", [(0, "lo"), (1, "hi")],           0.0,      4.0, 4.0),
    ("train08", [(1, "lo"), (2, "hi")],           3 * _PI / 2, 4.0, 4.0),
    ("train09", [(0, "hi"), (1, "lo"), (2, "hi")], 0.0,     4.0, 4.0),
    ("train10", [(0, "lo"), (1, "hi"), (2, "lo")], _PI,     4.0, 4.0),
    ("train11", [(0, "hi"), (1, "hi"), (2, "hi")], 0.0,     3.4, 4.0),
    ("train12", [(0, "lo"), (1, "lo"), (2, "lo")], _PI / 2, 4.0, 4.4),
    ("train13", [(1, "hi"), (2, "lo")],           0.0,      4.6, 3.6),
    # orientation / endpoint variants of the layouts above
    ("train14", [],                               _PI,      3.6, 4.4),
    ("train15", [(1, "lo")],                      _PI / 2,  4.4, 3.8),
    ("train16", [(1, "hi")],                      3 * _PI / 2, 3.8, 4.2),
    ("train17", [(0, "lo")],                      _PI,      4.0, 4.4),
    ("train18", [(2, "hi")],                      0.0,      3.6, 4.2),
    ("train19", [(0, "hi"), (2, "lo")],           _PI,      4.4, 3.8),
    ("train20", [(0, "lo"), (2, "hi")],           _PI / 2,  4.0, 4.0),
    ("train21", [(0, "lo"), (1, "hi")],           3 * _PI / 2, 3.8, 4.0),
    ("train22", [(1, "lo"), (2, "hi")],           0.0,      4.4, 4.2),
    ("train23", [(0, "hi"), (1, "lo"), (2, "hi")], _PI,     3.8, 4.2),
    ("train24", [(0, "lo"), (1, "hi"), (2, "lo")], _PI / 2, 4.2, 3.8),
    ("train25", [(0, "hi"), (1, "hi"), (2, "hi")], _PI,     4.2, 4.4),
    ("train26", [(0, "lo"), (1, "lo"), (2, "lo")], 0.0,     3.8, 3.6),
    ("train27", [(1, "hi"), (2, "lo")],           _PI,      3.6, 4.4),
]

_HOLDOUT_SPECS = [
    ("holdout00", [(0, "hi")],                     0.0,     4.0, 4.0),
    ("holdout01", [(2, "lo")],                     _PI,     4.0, 4.0),
    ("holdout02", [(0, "hi"), (1, "lo")],          0.0,     4.0, 4.2),
    ("holdout03", [(1, "lo"), (2, "lo")],          _PI / 2, 4.0, 4.0),
    ("holdout04", [(0, "lo"), (1, "lo"), (2, "hi")], 0.0,   4.2, 4.0),
    ("holdout05", [(0, "hi"), (1, "hi"), (2, "lo")], _PI,   4.0, 3.8),
]
# fmt: on


def _unseen_maps() -> list[MapConfig]:
    side = 0.85
    specs = [
        ("unseen00", [Obstacle(5.1, 4.0, side)], 0.0, 4.0, 4.0),
        ("unseen01", [Obstacle(6.9, 3.5, side), Obstacle(5.1, 4.5, side)], _PI, 4.0, 4.0),
        ("unseen02", [Obstacle(4.8, 4.4, 0.7), Obstacle(7.2, 3.6, 0.7)], 0.0, 3.6, 4.2),
        ("unseen03", [Obstacle(6.0, 4.1, 0.9), ], _PI / 2, 4.0, 4.0),
        ("unseen04", [Obstacle(5.4, 3.2, 0.7), Obstacle(6.6, 4.9, 0.7)], 0.0, 4.2, 3.8),
        ("unseen05", [Obstacle(4.6, 3.8, 0.75), Obstacle(6.2, 4.6, 0.75), Obstacle(7.8, 3.7, 0.75)],
         3 * _PI / 2, 4.0, 4.0),
    ]
    return [
        MapConfig(mid, tuple(obs), (_START_X, sy, th), (_GOAL_X, gy))
        for mid, obs, th, sy, gy in specs
    ]


def builtin_suite(split: str) -> list[MapConfig]:
    """Return the built-in map list for a split: 'train', 'holdout' or 'unseen'."""
    if split == "train":
        specs = _TRAIN_SPECS
    elif split == "holdout":
        specs = _HOLDOUT_SPECS
    elif split == "unseen":
        return _unseen_maps()
    else:
        raise MapError(f"unknown map split {split!r}")
    return [_grid_map(mid, slots, th, sy, gy) for mid, slots, th, sy, gy in specs]


def all_splits() -> dict[str, list[MapConfig]]:
    return {s: builtin_suite(s) for s in ("train", "holdout", "unseen")}


# ---------------------------------------------------------------------------
# JSON suite files
# ---------------------------------------------------------------------------


def map_to_dict(cfg: MapConfig) -> dict:
    return {
        "map_id": cfg.map_id,
        "obstacles": [[o.x, o.y, o.side] for o in cfg.obstacles],
        "initial_pose": list(cfg.initial_pose),
        "goal": list(cfg.goal),
    }


def map_from_dict(d: dict) -> MapConfig:
    return MapConfig(
        map_id=d["map_id"],
        obstacles=tuple(Obstacle(*o) for o in d["obstacles"]),
        initial_pose=tuple(d["initial_pose"]),
        goal=tuple(d["goal"]),
    )


def save_suite(path, maps: list[MapConfig]) -> None:
    with open(path, "w") as f:
        json.dump([map_to_dict(m) for m in maps], f, indent=1)


def load_suite(path) -> list[MapConfig]:
    with open(path) as f:
        return [map_from_dict(d) for d in json.load(f)]
