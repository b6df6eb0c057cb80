"""Task metrics: interaction-force decomposition, threshold binning,
state-visitation heatmaps, and their file outputs.

The interaction force is the internal force along the line between the two
grasp points, the component that stretches (positive) or compresses
(negative) the table without moving it. With both agents' forces projected
onto the grasp axis u (human end -> robot end), the antisymmetric half of
the pair is internal; the symmetric half transports the table.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dataset import EpisodeRecord
from .maps import MapConfig
from .sim import JointAction, PhysicsParams, TableState

BIN_EDGES = (0.25, 0.75)  # |normalized interaction force| thresholds
BIN_LABELS = ("negligible", "decision", "dissent")


@dataclass(frozen=True)
class InteractionForceSample:
    tick: int
    f_int: float       # N; positive = stretch, negative = compress
    f_int_norm: float  # f_int / f_max, clamped to [-1, 1]


def interaction_force(state: TableState, action: JointAction,
                      params: PhysicsParams, tick: int = 0) -> InteractionForceSample:
    """Signed internal force along the grasp axis.

    The axial components a_H = f_H . u and a_R = f_R . u decompose into a
    transport part (a_H + a_R, which accelerates the table) and an internal
    part (a_R - a_H) / 2 that cancels in the net force.
    """
    ux, uy = math.cos(state.theta), math.sin(state.theta)  # human end -> robot end
    a_h = action.human_fx * ux + action.human_fy * uy
    a_r = action.robot_fx * ux + action.robot_fy * uy
    f_int = 0.5 * (a_r - a_h)
    norm = f_int / params.f_max
    norm = min(1.0, max(-1.0, norm))
    return InteractionForceSample(tick=tick, f_int=f_int, f_int_norm=norm)


def episode_interaction_forces(ep: EpisodeRecord,
                               params: PhysicsParams) -> list[InteractionForceSample]:
    return [interaction_force(s, a, params, tick=i)
            for i, (s, a) in enumerate(zip(ep.states[:-1], ep.actions))]


def bin_index(f_int_norm: float) -> int:
    m = abs(f_int_norm)
    if m < BIN_EDGES[0]:
        return 0
    if m < BIN_EDGES[1]:
        return 1
    return 2


# ---------------------------------------------------------------------------
# spatial grids
# ---------------------------------------------------------------------------


@dataclass
class HeatmapGrid:
    """nx x ny cell grid over the world; `counts` is (ny, nx) or
    (ny, nx, n_bins) for the force-bin variant."""

    nx: int
    ny: int
    world_width: float
    world_height: float
    counts: np.ndarray
    kind: str  # "visitation" or "force_bins"

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        cx = min(self.nx - 1, max(0, int(x / self.world_width * self.nx)))
        cy = min(self.ny - 1, max(0, int(y / self.world_height * self.ny)))
        return cx, cy

    def total(self) -> float:
        return float(self.counts.sum())

    def normalized(self) -> np.ndarray:
        """Visitation: frequencies summing to 1. Force bins: per-cell bin
        frequencies summing to 1 in every visited cell."""
        if self.kind == "visitation":
            t = self.total()
            return self.counts / t if t > 0 else self.counts.copy()
        cell_tot = self.counts.sum(axis=2, keepdims=True)
        out = np.zeros_like(self.counts, dtype=np.float64)
        np.divide(self.counts, cell_tot, out=out, where=cell_tot > 0)
        return out


def make_grid(params: PhysicsParams, nx: int = 60, ny: int = 40,
              kind: str = "visitation") -> HeatmapGrid:
    shape = (ny, nx) if kind == "visitation" else (ny, nx, len(BIN_LABELS))
    return HeatmapGrid(nx=nx, ny=ny, world_width=params.world_width,
                       world_height=params.world_height,
                       counts=np.zeros(shape), kind=kind)


def visitation_heatmap(episodes: list[EpisodeRecord], params: PhysicsParams,
                       nx: int = 60, ny: int = 40) -> HeatmapGrid:
    """Count table-center visits per cell over all episode states."""
    if not episodes:
        raise ValueError("no episodes")
    grid = make_grid(params, nx, ny, "visitation")
    for ep in episodes:
        for s in ep.states:
            cx, cy = grid.cell_of(s.x, s.y)
            grid.counts[cy, cx] += 1
    return grid


def bin_interaction_forces(episodes: list[EpisodeRecord], params: PhysicsParams,
                           nx: int = 60, ny: int = 40) -> HeatmapGrid:
    """Per-cell histogram of |normalized interaction force| over the three
    threshold bins, at the table-center position of every tick."""
    if not episodes:
        raise ValueError("no episodes")
    grid = make_grid(params, nx, ny, "force_bins")
    for ep in episodes:
        for sample, state in zip(episode_interaction_forces(ep, params), ep.states):
            cx, cy = grid.cell_of(state.x, state.y)
            grid.counts[cy, cx, bin_index(sample.f_int_norm)] += 1
    return grid


def global_bin_fractions(episodes: list[EpisodeRecord],
                         params: PhysicsParams) -> dict[str, float]:
    counts = np.zeros(len(BIN_LABELS))
    for ep in episodes:
        for sample in episode_interaction_forces(ep, params):
            counts[bin_index(sample.f_int_norm)] += 1
    total = counts.sum()
    if total == 0:
        raise ValueError("no samples")
    return {label: float(c / total) for label, c in zip(BIN_LABELS, counts)}


# ---------------------------------------------------------------------------
# rendering and dumps
# ---------------------------------------------------------------------------


def render_heatmap(path, grid: HeatmapGrid, map_cfg: MapConfig | None = None,
                   title: str = "") -> None:
    """PNG with the grid underlaid and obstacle/goal overlays on top."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Circle, Rectangle

    if grid.kind == "visitation":
        img = grid.normalized()
    else:
        norm = grid.normalized()
        weights = np.array([0.0, 0.5, 1.0])  # dissent-weighted intensity
        img = (norm * weights).sum(axis=2)
    fig, ax = plt.subplots(figsize=(7.5, 5))
    ax.imshow(img, origin="lower", extent=(0, grid.world_width, 0, grid.world_height),
              cmap="viridis", interpolation="nearest")
    if map_cfg is not None:
        for ob in map_cfg.obstacles:
            ax.add_patch(Rectangle((ob.x - ob.half(), ob.y - ob.half()),
                                   ob.side, ob.side, color="red", alpha=0.8))
        ax.add_patch(Circle(map_cfg.goal, 0.3, color="lime", alpha=0.8))
    ax.set_title(title)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def dump_grid_csv(path, grid: HeatmapGrid) -> None:
    norm = grid.normalized()
    with open(path, "w") as f:
        if grid.kind == "visitation":
            f.write("cy,cx,frequency\n")
            for cy in range(grid.ny):
                for cx in range(grid.nx):
                    if grid.counts[cy, cx]:
                        f.write(f"{cy},{cx},{norm[cy, cx]:.9g}\n")
        else:
            f.write("cy,cx," + ",".join(BIN_LABELS) + "\n")
            for cy in range(grid.ny):
                for cx in range(grid.nx):
                    if grid.counts[cy, cx].sum():
                        vals = ",".join(f"{v:.9g}" for v in norm[cy, cx])
                        f.write(f"{cy},{cx},{vals}\n")


def dump_summary_json(path, per_method: dict[str, dict]) -> None:
    with open(path, "w") as f:
        json.dump(per_method, f, indent=1, sort_keys=True)
