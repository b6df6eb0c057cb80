"""Receding-horizon execution of trained policies in the simulator.

Two cadences: co-planning (the model drives both agents, executing the
first 8 planned actions per sample) and reactive (the model drives only
the robot end, one planned action per sample, with a partner supplying the
human force every simulator tick). Planned actions are zero-order held for
3 simulator ticks. Episodes are seed-deterministic; evaluation can run many
episodes in lockstep so the denoiser is called on batches.
"""

from __future__ import annotations

import csv
import math
import time
import zlib
from dataclasses import dataclass

import numpy as np

from .dataset import EpisodeRecord, PLAN_STRIDE, SOURCE_POLICY_EVAL, quantize_action
from .demos import Path, build_route, route_modes
from .denoiser import BCBaseline, Denoiser
from .diffusion import jump_step, reverse_step, strided_plan
from .maps import MapConfig
from .obs import NormStats, encode_obs
from .schedule import NoiseSchedule, make_schedule
from .sim import (
    EVENT_NONE,
    EVENT_TIMEOUT,
    JointAction,
    PhysicsParams,
    TableState,
    attachment_points,
    initial_state,
    step,
)

DEFAULT_TIMEOUT_TICKS = 1800  # 60 s at 30 Hz


@dataclass(frozen=True)
class RuntimeConfig:
    mode: str                 # "coplan" or "reactive"
    t_action: int             # planned actions executed per sample
    n_inference_steps: int
    zoh: int = PLAN_STRIDE
    partner: str = "policy_both"
    timeout_ticks: int = DEFAULT_TIMEOUT_TICKS

    def __post_init__(self):
        if self.mode not in ("coplan", "reactive"):
            raise ValueError(f"unknown runtime mode {self.mode!r}")
        if self.zoh != PLAN_STRIDE:
            raise ValueError("the plan-rate bridge is fixed at 3 simulator ticks per action")

    @classmethod
    def coplan(cls, **kw) -> "RuntimeConfig":
        base = dict(mode="coplan", t_action=8, n_inference_steps=100,
                    partner="policy_both")
        base.update(kw)
        return cls(**base)

    @classmethod
    def reactive(cls, partner: str, **kw) -> "RuntimeConfig":
        base = dict(mode="reactive", t_action=1, n_inference_steps=34, partner=partner)
        base.update(kw)
        return cls(**base)


# ---------------------------------------------------------------------------
# scripted partners
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScriptedPartner:
    name: str
    route_choice: str         # "above" or "below", applied per obstacle
    stubbornness: float = 0.9  # weight on route tracking vs yielding to motion
    kp: float = 2.4
    kd: float = 1.7
    noise_sigma: float = 0.02
    cruise_speed: float = 0.62
    yield_force: float = 0.7

    def __post_init__(self):
        if not (0.0 <= self.stubbornness <= 1.0):
            raise ValueError("stubbornness must lie in [0, 1]")


STOCK_PARTNERS = {
    "stubborn_above": ScriptedPartner("stubborn_above", "above", stubbornness=0.9),
    "stubborn_below": ScriptedPartner("stubborn_below", "below", stubbornness=0.9),
    "compliant": ScriptedPartner("compliant", "above", stubbornness=0.2),
}


def partner_route(partner: ScriptedPartner, map_cfg: MapConfig,
                  params: PhysicsParams) -> Path:
    """The partner's preferred route; falls back to the nearest feasible mode."""
    n = len(map_cfg.obstacles)
    want = tuple(partner.route_choice for _ in range(n))
    path = build_route(map_cfg, want, params)
    if path is not None:
        return path
    candidates = [(sum(a != b for a, b in zip(m, want)), m) for m in route_modes(map_cfg)]
    for _, mode in sorted(candidates):
        path = build_route(map_cfg, mode, params)
        if path is not None:
            return path
    raise ValueError(f"map {map_cfg.map_id!r} has no feasible route for partner")


class PartnerState:
    """Per-episode mutable tracking state of a scripted partner."""

    def __init__(self, partner: ScriptedPartner, map_cfg: MapConfig,
                 params: PhysicsParams, rng: np.random.Generator):
        self.partner = partner
        self.path = partner_route(partner, map_cfg, params)
        self.progress = 0.0
        self.rng = rng

    def act(self, state: TableState, params: PhysicsParams) -> tuple[float, float]:
        """Force on the human end: route tracking blended with yielding."""
        p = self.partner
        (hx, hy), _ = attachment_points(state, params)
        cx, cy = self.path.point_at(self.progress)
        if math.hypot(cx - hx, cy - hy) < 0.5:
            self.progress = min(self.progress + p.cruise_speed * params.dt_sim,
                                self.path.length)
            cx, cy = self.path.point_at(self.progress)
        phi = self.path.tangent_at(self.progress)
        done = self.progress >= self.path.length - 1e-9
        tvx = 0.0 if done else p.cruise_speed * math.cos(phi)
        tvy = 0.0 if done else p.cruise_speed * math.sin(phi)
        rx, ry = hx - state.x, hy - state.y
        avx = state.vx - state.omega * ry
        avy = state.vy + state.omega * rx
        track_x = p.kp * (cx - hx) + p.kd * (tvx - avx)
        track_y = p.kp * (cy - hy) + p.kd * (tvy - avy)
        speed = math.hypot(state.vx, state.vy)
        if speed > 1e-6:
            yield_x = p.yield_force * params.f_max * state.vx / speed
            yield_y = p.yield_force * params.f_max * state.vy / speed
        else:
            yield_x = yield_y = 0.0
        lam = p.stubbornness
        fx = lam * track_x + (1.0 - lam) * yield_x
        fy = lam * track_y + (1.0 - lam) * yield_y
        fx += p.noise_sigma * params.f_max * self.rng.standard_normal()
        fy += p.noise_sigma * params.f_max * self.rng.standard_normal()
        c = params.f_max
        return min(c, max(-c, fx)), min(c, max(-c, fy))


def scripted_partner_act(partner: ScriptedPartner, state: TableState,
                         map_cfg: MapConfig, params: PhysicsParams,
                         rng: np.random.Generator) -> tuple[float, float]:
    """Single-call convenience wrapper around PartnerState (stateless tests)."""
    ps = PartnerState(partner, map_cfg, params, rng)
    # hold progress at the nearest path point so the tangent is meaningful
    best_s, best_d = 0.0, float("inf")
    for i in range(201):
        s = ps.path.length * i / 200
        px, py = ps.path.point_at(s)
        d = math.hypot(px - state.x, py - state.y)
        if d < best_d:
            best_s, best_d = s, d
    ps.progress = best_s
    return ps.act(state, params)


# ---------------------------------------------------------------------------
# policy wrappers with a common "plan a batch" interface
# ---------------------------------------------------------------------------


class DiffusionPolicy:
    def __init__(self, model: Denoiser, stats: NormStats,
                 schedule: NoiseSchedule | None = None):
        self.model = model
        self.stats = stats
        self.schedule = schedule or make_schedule(model.config.diffusion_steps)

    @property
    def t_obs(self):
        return self.model.config.t_obs

    @property
    def t_pred(self):
        return self.model.config.t_pred

    def plan_batch(self, obs, human, valid, n_steps: int,
                   rngs: list[np.random.Generator]) -> np.ndarray:
        """Sample normalized action windows for a batch of conditioning
        windows; per-episode noise comes from each episode's own stream.
        n_steps is capped at the chain length (a request covering the whole
        chain runs the full stochastic sampler)."""
        b = obs.shape[0]
        cfg = self.model.config
        shape = (b, cfg.t_pred, cfg.action_dim)
        x = np.stack([rng.standard_normal(shape[1:]) for rng in rngs])
        sched = self.schedule
        n_steps = min(n_steps, sched.K)
        if n_steps == sched.K:
            for k in range(sched.K, 0, -1):
                eps_hat = self.model.predict_noise_batch(
                    obs, human, valid, x, np.full(b, k, dtype=np.int64))
                if sched.sigma[k] > 0.0:
                    z = np.stack([rng.standard_normal(shape[1:]) for rng in rngs])
                    x = reverse_step(x, k, eps_hat, sched, z)
                else:
                    x = reverse_step(x, k, eps_hat, sched, None)
        else:
            for k_from, k_to in strided_plan(sched.K, n_steps):
                eps_hat = self.model.predict_noise_batch(
                    obs, human, valid, x, np.full(b, k_from, dtype=np.int64))
                x = jump_step(x, k_from, k_to, eps_hat, sched, eta=0.0)
        return np.clip(x, -1.0, 1.0)


class BCPolicy:
    def __init__(self, model: BCBaseline, stats: NormStats):
        self.model = model
        self.stats = stats

    @property
    def t_obs(self):
        return self.model.config.t_obs

    @property
    def t_pred(self):
        return self.model.config.t_pred

    def plan_batch(self, obs, human, valid, n_steps, rngs) -> np.ndarray:
        pred = self.model.predict_batch(obs, human)  # (b, 4)
        out = np.clip(pred, -1.0, 1.0)
        return np.repeat(out[:, None, :], self.model.config.t_pred, axis=1)


def wrap_policy(model, stats: NormStats):
    if isinstance(model, Denoiser):
        return DiffusionPolicy(model, stats)
    if isinstance(model, BCBaseline):
        return BCPolicy(model, stats)
    raise TypeError(f"no policy wrapper for {type(model).__name__}")


# ---------------------------------------------------------------------------
# episode execution
# ---------------------------------------------------------------------------


class WindowTracker:
    """Plan-rate history bookkeeping shared by the batch runtime and the
    live server: one observation per completed action bin plus the binned
    partner actions, assembled into normalized conditioning windows."""

    def __init__(self, t_obs: int, stats: NormStats, map_cfg: MapConfig):
        self.t_obs = t_obs
        self.stats = stats
        self.map = map_cfg
        self.obs_hist: list[np.ndarray] = []
        self.human_hist: list[np.ndarray] = []

    def push_bin(self, bin_start_state: TableState, executed_human) -> None:
        self.obs_hist.append(encode_obs(bin_start_state, self.map))
        self.human_hist.append(np.mean(executed_human, axis=0))

    def window(self, state: TableState):
        """Conditioning arrays for the current tick (normalized)."""
        cur = encode_obs(state, self.map)
        rows, hums, valid = [], [], []
        hist_o = self.obs_hist + [cur]
        for j in range(self.t_obs):
            src = len(hist_o) - self.t_obs + j
            if src >= 0:
                rows.append(hist_o[src])
                valid.append(True)
                hidx = src - 1
                hums.append(self.human_hist[hidx] if hidx >= 0 else np.zeros(2))
            else:
                rows.append(hist_o[0])
                hums.append(np.zeros(2))
                valid.append(False)
        obs = self.stats.apply_obs(np.stack(rows))
        human = np.stack(hums) / self.stats.action_scale
        return obs, human, np.asarray(valid, dtype=bool)


class _EpisodeDriver:
    """State of one rolling episode at the plan rate."""

    def __init__(self, map_cfg: MapConfig, policy, runtime: RuntimeConfig,
                 params: PhysicsParams, seed: int):
        self.map = map_cfg
        self.policy = policy
        self.runtime = runtime
        self.params = params
        self.seed = seed
        ss = np.random.SeedSequence(seed)
        plan_ss, partner_ss = ss.spawn(2)
        self.rng_plan = np.random.default_rng(plan_ss)
        self.state = initial_state(map_cfg)
        self.states = [self.state]
        self.actions: list[JointAction] = []
        self.tracker = WindowTracker(policy.t_obs, policy.stats, map_cfg)
        self.plan_ms: list[float] = []
        self.n_sampler_calls = 0
        self.outcome: str | None = None
        self.queue: list[np.ndarray] = []  # planned joint actions, force units
        self.partner_state = None
        if runtime.mode == "reactive" and runtime.partner.startswith("scripted:"):
            name = runtime.partner.split(":", 1)[1]
            self.partner_state = PartnerState(
                STOCK_PARTNERS[name], map_cfg, params, np.random.default_rng(partner_ss))
        elif runtime.mode == "reactive" and runtime.partner == "policy_both":
            raise ValueError("reactive mode needs a partner")

    @property
    def tick(self) -> int:
        return len(self.actions)

    @property
    def human_hist(self) -> list[np.ndarray]:
        return self.tracker.human_hist

    def needs_plan(self) -> bool:
        if self.outcome is not None:
            return False
        cadence = self.runtime.t_action * self.runtime.zoh
        return self.tick % cadence == 0 and not self.queue

    def window(self):
        return self.tracker.window(self.state)

    def accept_plan(self, plan_norm: np.ndarray, plan_seconds: float) -> None:
        acts = plan_norm * self.policy.stats.action_scale
        self.queue = [acts[i] for i in range(self.runtime.t_action)]
        self.plan_ms.append(plan_seconds * 1000.0)
        self.n_sampler_calls += 1

    def step_plan_action(self) -> None:
        """Consume one planned action: hold it for zoh simulator ticks."""
        planned = self.queue.pop(0)
        executed_human = []
        for _ in range(self.runtime.zoh):
            if self.outcome is not None:
                return
            if self.runtime.mode == "coplan":
                act = JointAction(planned[0], planned[1], planned[2], planned[3])
            else:
                hfx, hfy = self.partner_state.act(self.state, self.params)
                act = JointAction(hfx, hfy, planned[2], planned[3])
            act = quantize_action(act.clipped(self.params.f_max))
            out = step(self.state, act, self.params, self.map)
            self.actions.append(act)
            self.states.append(out.next_state)
            self.state = out.next_state
            executed_human.append([act.human_fx, act.human_fy])
            if out.event != EVENT_NONE:
                self.outcome = out.event
            elif self.tick >= self.runtime.timeout_ticks:
                self.outcome = EVENT_TIMEOUT
        # plan-rate bookkeeping: the observation this action bin started from
        self.tracker.push_bin(self.states[-1 - len(executed_human)], executed_human)

    def record(self) -> EpisodeRecord:
        return EpisodeRecord(
            map=self.map, states=self.states, actions=self.actions,
            outcome=self.outcome or EVENT_TIMEOUT, source=SOURCE_POLICY_EVAL,
            seed=self.seed, plan_ms=self.plan_ms,
        )


def run_episode(map_cfg: MapConfig, model, stats: NormStats,
                runtime: RuntimeConfig, seed: int,
                params: PhysicsParams | None = None) -> EpisodeRecord:
    """Roll one episode to termination; deterministic for a given seed."""
    params = params or PhysicsParams()
    policy = wrap_policy(model, stats)
    if runtime.t_action > policy.t_pred:
        raise ValueError(f"t_action {runtime.t_action} exceeds prediction horizon "
                         f"{policy.t_pred}")
    drv = _EpisodeDriver(map_cfg, policy, runtime, params, seed)
    while drv.outcome is None:
        if drv.needs_plan():
            obs, human, valid = drv.window()
            t0 = time.perf_counter()
            plan = policy.plan_batch(obs[None], human[None], valid[None],
                                     runtime.n_inference_steps, [drv.rng_plan])
            drv.accept_plan(plan[0], time.perf_counter() - t0)
        drv.step_plan_action()
    return drv.record()


def run_episodes_batched(jobs: list[tuple[MapConfig, int]], model, stats: NormStats,
                         runtime: RuntimeConfig,
                         params: PhysicsParams | None = None) -> list[EpisodeRecord]:
    """Run many episodes in lockstep, batching denoiser calls across the
    active episodes. Per-episode randomness comes from per-episode streams,
    so results do not depend on which other episodes share the batch (up to
    blas reduction order)."""
    params = params or PhysicsParams()
    policy = wrap_policy(model, stats)
    drivers = [_EpisodeDriver(m, policy, runtime, params, seed) for m, seed in jobs]
    while True:
        active = [d for d in drivers if d.outcome is None]
        if not active:
            break
        planners = [d for d in active if d.needs_plan()]
        if planners:
            wins = [d.window() for d in planners]
            obs = np.stack([w[0] for w in wins])
            human = np.stack([w[1] for w in wins])
            valid = np.stack([w[2] for w in wins])
            t0 = time.perf_counter()
            plans = policy.plan_batch(obs, human, valid, runtime.n_inference_steps,
                                      [d.rng_plan for d in planners])
            dt = (time.perf_counter() - t0) / max(1, len(planners))
            for d, plan in zip(planners, plans):
                d.accept_plan(plan, dt)
        for d in active:
            d.step_plan_action()
    return [d.record() for d in drivers]


# ---------------------------------------------------------------------------
# evaluation driver
# ---------------------------------------------------------------------------


@dataclass
class EvalRow:
    method: str
    split: str
    map_id: str
    seed: int
    outcome: str
    duration_s: float
    mean_plan_ms: float


def evaluate_suite(methods: dict, suites: dict, runtime_for, seeds_per_map: int,
                   params: PhysicsParams | None = None, base_seed: int = 0,
                   batched: bool = True, progress=None):
    """Evaluate each method over each split.

    methods: name -> (model, stats); suites: split -> [MapConfig];
    runtime_for: fn(method_name) -> RuntimeConfig. Returns (rows, summary).
    """
    params = params or PhysicsParams()
    rows: list[EvalRow] = []
    for method, (model, stats) in methods.items():
        runtime = runtime_for(method)
        for split, maps in suites.items():
            method_key = zlib.crc32(method.encode()) & 0xFFFF
            jobs = []
            for mi, m in enumerate(maps):
                for s in range(seeds_per_map):
                    seed = int(np.random.SeedSequence(
                        base_seed, spawn_key=(method_key, mi, s)
                    ).generate_state(1)[0])
                    jobs.append((m, seed))
            if batched:
                records = run_episodes_batched(jobs, model, stats, runtime, params)
            else:
                records = [run_episode(m, model, stats, runtime, s, params)
                           for m, s in jobs]
            for (m, seed), rec in zip(jobs, records):
                rows.append(EvalRow(
                    method=method, split=split, map_id=m.map_id, seed=seed,
                    outcome=rec.outcome, duration_s=rec.duration_s(params),
                    mean_plan_ms=float(np.mean(rec.plan_ms)) if rec.plan_ms else 0.0,
                ))
            if progress is not None:
                progress(method, split, rows)
    summary = summarize(rows)
    return rows, summary


def summarize(rows: list[EvalRow]) -> list[dict]:
    out = []
    keys = sorted({(r.method, r.split) for r in rows})
    for method, split in keys:
        sel = [r for r in rows if r.method == method and r.split == split]
        succ = [r for r in sel if r.outcome == "goal_reached"]
        times = [r.duration_s for r in succ]
        out.append({
            "method": method,
            "split": split,
            "episodes": len(sel),
            "success_rate": len(succ) / len(sel) if sel else 0.0,
            "mean_time_s": float(np.mean(times)) if times else float("nan"),
            "sd_time_s": float(np.std(times)) if times else float("nan"),
            "mean_plan_ms": float(np.mean([r.mean_plan_ms for r in sel])),
        })
    return out


def write_eval_csv(path, rows: list[EvalRow]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["method", "split", "map_id", "seed", "outcome",
                    "duration_s", "mean_plan_ms"])
        for r in rows:
            w.writerow([r.method, r.split, r.map_id, r.seed, r.outcome,
                        f"{r.duration_s:.9g}", f"{r.mean_plan_ms:.3f}"])


def write_summary_csv(path, summary: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["method", "split", "episodes",
                                          "success_rate", "mean_time_s",
                                          "sd_time_s", "mean_plan_ms"])
        w.writeheader()
        for row in summary:
            w.writerow(row)


def format_summary_table(summary: list[dict]) -> str:
    head = f"{'method':<12} {'split':<10} {'n':>4} {'success':>8} {'time (s)':>16} {'plan (ms)':>10}"
    lines = [head, "-" * len(head)]
    for r in summary:
        t = (f"{r['mean_time_s']:.1f} ± {r['sd_time_s']:.1f}"
             if not math.isnan(r["mean_time_s"]) else "-")
        lines.append(f"{r['method']:<12} {r['split']:<10} {r['episodes']:>4} "
                     f"{100 * r['success_rate']:>7.1f}% {t:>16} {r['mean_plan_ms']:>10.1f}")
    return "\n".join(lines)
