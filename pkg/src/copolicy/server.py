"""Live human-in-the-loop bridge.

Runs the simulator at a wall-clock 30 Hz, executes the trained robot policy
in reactive mode (one reduced-step sample per 3 ticks, computed
concurrently with simulation), accepts human force commands over a
websocket, broadcasts state frames, and records finished episodes.

Concurrency: the fixed-rate sim loop is the sole owner of session state.
The websocket reader only appends to an inbox; outbound frames go through a
bounded queue drained by a sender task (newest frames win when the client
is slow); the sampler runs in a worker thread and hands plans back through
a single-slot mailbox.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from .dataset import EpisodeRecord, SOURCE_HIL, save_dataset, quantize_action
from .maps import MapConfig, all_splits, map_to_dict
from .obs import NormStats
from .runtime import WindowTracker, wrap_policy
from .sim import (
    EVENT_NONE,
    EVENT_TIMEOUT,
    JointAction,
    PhysicsParams,
    initial_state,
    step,
)
from .training import load_policy

PROTOCOL_VERSION = "1"
PLAN_EVERY_TICKS = 3


def wire_force(v: float) -> float:
    """Forces cross the wire with 6 significant digits."""
    if v == 0.0 or not math.isfinite(v):
        return 0.0
    return float(f"{v:.6g}")


class WallClock:
    def now(self) -> float:
        return time.monotonic()

    async def sleep_until(self, target: float) -> None:
        delta = target - self.now()
        if delta > 0:
            await asyncio.sleep(delta)


class FastClock:
    """Test clock: time jumps straight to every deadline, yielding to the
    event loop so network traffic interleaves deterministically."""

    def __init__(self):
        self._now = 0.0

    def now(self) -> float:
        return self._now

    async def sleep_until(self, target: float) -> None:
        if target > self._now:
            self._now = target
        await asyncio.sleep(0)


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    staleness_ms: float = 200.0
    countdown_s: float = 1.0
    max_episode_s: float = 60.0
    record_dir: str | None = None
    static_dir: str | None = None

    @classmethod
    def from_tree(cls, cfg: dict) -> "ServerConfig":
        s = cfg["server"]
        return cls(host=s["host"], port=s["port"], staleness_ms=s["staleness_ms"],
                   countdown_s=s["countdown_s"], max_episode_s=s["max_episode_s"])


_session_counter = itertools.count(1)


class Session:
    """One connected client: lobby -> countdown -> running -> ended."""

    def __init__(self, server: "HilServer"):
        self.server = server
        self.id = f"s{next(_session_counter)}"
        self.phase = "lobby"
        self.map: MapConfig | None = None
        self.state = None
        self.tick = 0
        self.countdown_left = 0
        self.states = []
        self.actions = []
        self.tracker: WindowTracker | None = None
        self.bin_start_state = None
        self.bin_human: list[list[float]] = []
        self.plan_rng = np.random.default_rng(0)
        self.current_plan = None          # np[4] normalized joint action
        self.plan_future = None
        self.plan_snapshot_tick = -1      # tick of the snapshot the plan used
        self.pending_snapshot_tick = -1
        self.max_plan_age = 0
        self.overruns = 0
        self.episode_index = 0
        # latest human command
        self.input_fx = 0.0
        self.input_fy = 0.0
        self.input_time = -1e9
        self.inbox: list[dict] = []
        self.outbox: asyncio.Queue = asyncio.Queue(maxsize=64)
        self.closed = False
        self.last_record: EpisodeRecord | None = None

    # -- message handling (called from the sim loop only) -------------------

    def handle(self, msg: dict) -> None:
        kind = msg.get("type")
        if kind == "hello":
            self.post(self.server.map_info_message(self))
        elif kind == "input":
            fx = max(-1.0, min(1.0, float(msg.get("fx", 0.0))))
            fy = max(-1.0, min(1.0, float(msg.get("fy", 0.0))))
            self.input_fx, self.input_fy = wire_force(fx), wire_force(fy)
            self.input_time = self.server.clock.now()
        elif kind == "start":
            if self.phase in ("lobby", "ended"):
                self.start_episode(msg.get("map_id"))
        elif kind == "reset":
            if self.phase == "running":
                self.finish_episode("timeout", aborted=True)
            self.phase = "lobby"
        else:
            self.post({"type": "error", "message": f"unknown message type {kind!r}"})

    def post(self, payload: dict) -> None:
        payload["protocol_version"] = PROTOCOL_VERSION
        payload["session"] = self.id
        if self.outbox.full():
            try:
                self.outbox.get_nowait()  # newest wins
            except asyncio.QueueEmpty:
                pass
        self.outbox.put_nowait(payload)

    # -- episode lifecycle ---------------------------------------------------

    def start_episode(self, map_id) -> None:
        srv = self.server
        chosen = srv.maps_by_id.get(map_id) if map_id else srv.default_map
        if chosen is None:
            self.post({"type": "error", "message": f"unknown map_id {map_id!r}"})
            return
        self.map = chosen
        self.state = initial_state(chosen)
        self.states = [self.state]
        self.actions = []
        self.tick = 0
        self.tracker = WindowTracker(srv.policy.t_obs, srv.stats, chosen)
        self.bin_start_state = self.state
        self.bin_human = []
        self.plan_rng = np.random.default_rng(
            np.random.SeedSequence(srv.seed, spawn_key=(self.episode_index,)))
        self.current_plan = None
        self.plan_future = None
        self.plan_snapshot_tick = -1
        self.pending_snapshot_tick = -1
        self.max_plan_age = 0
        self.overruns = 0
        self.countdown_left = max(0, round(srv.cfg.countdown_s / srv.params.dt_sim))
        self.phase = "countdown" if self.countdown_left else "running"

    def human_force(self) -> tuple[float, float]:
        age = self.server.clock.now() - self.input_time
        if age > self.server.cfg.staleness_ms / 1000.0:
            return 0.0, 0.0
        f = self.server.params.f_max
        return self.input_fx * f, self.input_fy * f

    def robot_force(self) -> tuple[float, float]:
        if self.current_plan is None:
            return 0.0, 0.0
        f = self.server.params.f_max
        return float(self.current_plan[2]) * f, float(self.current_plan[3]) * f

    def sim_tick(self) -> None:
        srv = self.server
        if self.phase == "countdown":
            self.countdown_left -= 1
            msg = self.state_message(JointAction(0, 0, 0, 0), EVENT_NONE)
            msg["phase"] = "countdown"  # the flip below must not leak into this frame
            if self.countdown_left <= 0:
                self.phase = "running"
            self.post(msg)
            return
        if self.phase != "running":
            return

        if self.tick % PLAN_EVERY_TICKS == 0:
            self.collect_plan()
        if self.current_plan is not None and self.plan_snapshot_tick >= 0:
            self.max_plan_age = max(self.max_plan_age,
                                    self.tick - self.plan_snapshot_tick)
        hfx, hfy = self.human_force()
        rfx, rfy = self.robot_force()
        act = quantize_action(
            JointAction(hfx, hfy, rfx, rfy).clipped(srv.params.f_max))
        out = step(self.state, act, srv.params, self.map)
        self.actions.append(act)
        self.states.append(out.next_state)
        self.state = out.next_state
        self.tick += 1
        self.bin_human.append([act.human_fx, act.human_fy])
        if len(self.bin_human) == PLAN_EVERY_TICKS:
            self.tracker.push_bin(self.bin_start_state, self.bin_human)
            self.bin_start_state = self.state
            self.bin_human = []
        event = out.event
        if event == EVENT_NONE and self.tick >= srv.max_ticks:
            event = EVENT_TIMEOUT
        self.post(self.state_message(act, event))
        if event != EVENT_NONE:
            self.finish_episode(event)

    def collect_plan(self) -> None:
        """Pipelined sampling: adopt the last finished plan and kick off the
        next one from a snapshot of the freshest window."""
        srv = self.server
        if self.plan_future is not None:
            if self.plan_future.done():
                self.current_plan = self.plan_future.result()
                self.plan_snapshot_tick = self.pending_snapshot_tick
                self.plan_future = None
            else:
                self.overruns += 1
                return  # hold the previous plan; the late result lands next bin
        obs, human, valid = self.tracker.window(self.state)
        self.pending_snapshot_tick = self.tick
        self.plan_future = srv.executor.submit(
            srv.sample_plan, obs, human, valid, self.plan_rng)

    def finish_episode(self, outcome: str, aborted: bool = False) -> None:
        srv = self.server
        self.phase = "ended"
        self.episode_index += 1
        duration = self.tick * srv.params.dt_sim
        self.post({"type": "episode_end", "outcome": outcome,
                   "duration_s": round(duration, 3), "aborted": aborted,
                   "overruns": self.overruns,
                   "max_plan_age_ticks": self.max_plan_age})
        if self.actions and srv.cfg.record_dir:
            rec = EpisodeRecord(map=self.map, states=self.states,
                                actions=self.actions, outcome=outcome,
                                source=SOURCE_HIL, seed=srv.seed)
            path = FsPath(srv.cfg.record_dir) / f"hil_{self.id}_{self.episode_index}.ndjson"
            save_dataset(path, [rec], srv.params, generator_seed=srv.seed)
        self.last_record = EpisodeRecord(
            map=self.map, states=self.states, actions=self.actions,
            outcome=outcome, source=SOURCE_HIL, seed=srv.seed) if self.actions else None

    def state_message(self, act: JointAction, event: str) -> dict:
        s = self.state
        return {
            "type": "state",
            "tick": self.tick,
            "phase": self.phase,
            "x": round(s.x, 6), "y": round(s.y, 6), "theta": round(s.theta, 6),
            "vx": round(s.vx, 6), "vy": round(s.vy, 6), "omega": round(s.omega, 6),
            "action": {
                "hfx": wire_force(act.human_fx), "hfy": wire_force(act.human_fy),
                "rfx": wire_force(act.robot_fx), "rfy": wire_force(act.robot_fy),
            },
            "event": event,
        }


class HilServer:
    def __init__(self, model, stats: NormStats, cfg: ServerConfig,
                 params: PhysicsParams, maps: list[MapConfig],
                 clock=None, seed: int = 0, n_inference_steps: int = 34):
        self.policy = wrap_policy(model, stats)
        self.stats = stats
        self.cfg = cfg
        self.params = params
        self.maps_by_id = {m.map_id: m for m in maps}
        self.default_map = maps[0]
        self.clock = clock or WallClock()
        self.seed = seed
        self.n_inference_steps = n_inference_steps
        self.max_ticks = round(cfg.max_episode_s / params.dt_sim)
        self.executor = ThreadPoolExecutor(max_workers=1)
        self.sessions: set[Session] = set()

    def sample_plan(self, obs, human, valid, rng) -> np.ndarray:
        plan = self.policy.plan_batch(obs[None], human[None], valid[None],
                                      self.n_inference_steps, [rng])
        return plan[0][0]  # first planned joint action, normalized

    def map_info_message(self, session: Session) -> dict:
        return {
            "type": "map_info",
            "maps": [map_to_dict(m) for m in self.maps_by_id.values()],
            "default_map": self.default_map.map_id,
            "world": {"width": self.params.world_width,
                      "height": self.params.world_height,
                      "table_length": self.params.table_length,
                      "table_width": self.params.table_width,
                      "goal_radius": self.params.goal_radius},
            "rate_hz": 1.0 / self.params.dt_sim,
        }

    # -- aiohttp wiring ------------------------------------------------------

    def build_app(self):
        from aiohttp import web

        app = web.Application()
        app.router.add_get("/ws", self.handle_ws)
        app.router.add_get("/", self.handle_index)
        static = self.cfg.static_dir
        if static and FsPath(static).is_dir():
            app.router.add_static("/static/", static)
        return app

    async def handle_index(self, request):
        from aiohttp import web

        static = self.cfg.static_dir
        if static:
            index = FsPath(static) / "index.html"
            if index.is_file():
                return web.FileResponse(index)
        return web.Response(
            text="<html><body><h1>table-carry teleop server</h1>"
                 "<p>No UI bundle built; connect a client to /ws.</p></body></html>",
            content_type="text/html")

    async def handle_ws(self, request):
        from aiohttp import WSMsgType, web

        ws = web.WebSocketResponse(heartbeat=30)
        await ws.prepare(request)
        session = Session(self)
        self.sessions.add(session)
        sender = asyncio.create_task(self._send_loop(ws, session))
        sim = asyncio.create_task(self._sim_loop(session))
        try:
            async for msg in ws:
                if msg.type == WSMsgType.TEXT:
                    try:
                        payload = json.loads(msg.data)
                    except json.JSONDecodeError:
                        session.post({"type": "error", "message": "bad json"})
                        continue
                    session.inbox.append(payload)
                elif msg.type in (WSMsgType.ERROR, WSMsgType.CLOSE):
                    break
        finally:
            session.closed = True
            if session.phase == "running":
                session.finish_episode("timeout", aborted=True)
            self.sessions.discard(session)
            sim.cancel()
            sender.cancel()
        return ws

    async def _send_loop(self, ws, session: Session) -> None:
        while not session.closed:
            payload = await session.outbox.get()
            try:
                await ws.send_str(json.dumps(payload))
            except (ConnectionError, RuntimeError):
                session.closed = True
                return

    async def _sim_loop(self, session: Session) -> None:
        dt = self.params.dt_sim
        next_deadline = self.clock.now() + dt
        while not session.closed:
            # drain the inbox before the tick so fresh input affects it
            inbox, session.inbox = session.inbox, []
            for msg in inbox:
                session.handle(msg)
            session.sim_tick()
            await self.clock.sleep_until(next_deadline)
            next_deadline += dt


def serve_forever(checkpoint_path, cfg_tree: dict) -> None:
    """Blocking entry point used by the command line."""
    from aiohttp import web

    model, stats, meta = load_policy(checkpoint_path)
    params = PhysicsParams(**cfg_tree["physics"])
    scfg = ServerConfig.from_tree(cfg_tree)
    frontend = FsPath(__file__).resolve().parents[2] / "frontend" / "dist"
    if frontend.is_dir():
        scfg.static_dir = str(frontend)
    maps = [m for split in all_splits().values() for m in split]
    server = HilServer(model, stats, scfg, params, maps,
                       seed=cfg_tree["seed"],
                       n_inference_steps=cfg_tree["runtime"]["reactive_inference_steps"])
    app = server.build_app()
    print(f"serving on http://{scfg.host}:{scfg.port} (websocket at /ws)", flush=True)
    web.run_app(app, host=scfg.host, port=scfg.port, print=None)
