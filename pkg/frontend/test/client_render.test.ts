import { test } from "node:test";
import assert from "node:assert/strict";

import { SessionClient, SocketLike } from "../src/client.js";
import { FrameBuffer } from "../src/interpolate.js";
import { WorldRenderer, interactionGauge } from "../src/render.js";
import type { MapInfo, StateFrame } from "../src/protocol.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onopen: (() => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.onclose?.();
  }

  open(): void {
    this.onopen?.();
  }

  deliver(payload: unknown): void {
    this.onmessage?.({ data: JSON.stringify(payload) });
  }
}

const MAP_INFO: MapInfo = {
  type: "map_info",
  maps: [
    {
      map_id: "m0",
      obstacles: [[6, 3.3, 0.8]],
      initial_pose: [1.4, 4, 0],
      goal: [10.6, 4],
    },
  ],
  default_map: "m0",
  world: { width: 12, height: 8, table_length: 1.2, table_width: 0.3, goal_radius: 0.3 },
  rate_hz: 30,
};

function stateFrame(tick: number, phase: StateFrame["phase"] = "running"): StateFrame {
  return {
    type: "state",
    tick,
    phase,
    x: 1.4 + tick * 0.02,
    y: 4 + Math.sin(tick / 10) * 0.5,
    theta: tick * 0.01,
    vx: 0.6,
    vy: 0,
    omega: 0.01,
    action: { hfx: 0.4, hfy: -0.1, rfx: 0.5, rfy: 0.0 },
    event: "none",
  };
}

function connectedClient() {
  const sock = new FakeSocket();
  const phases: string[] = [];
  const client = new SessionClient(
    "ws://test/ws",
    () => sock,
    { onPhase: (p) => phases.push(p) },
    () => 1000,
  );
  client.connect();
  sock.open();
  return { sock, client, phases };
}

test("client says hello on open and mirrors server phases", () => {
  const { sock, client, phases } = connectedClient();
  assert.equal(JSON.parse(sock.sent[0]).type, "hello");
  sock.deliver(MAP_INFO);
  assert.equal(client.mapInfo?.default_map, "m0");
  sock.deliver(stateFrame(0, "countdown"));
  sock.deliver(stateFrame(1, "running"));
  sock.deliver({ type: "episode_end", outcome: "goal_reached", duration_s: 12.3 });
  assert.deepEqual(phases, ["countdown", "running", "ended"]);
});

test("inputs are sent only while running", () => {
  const { sock, client } = connectedClient();
  sock.deliver(MAP_INFO);
  assert.equal(client.sendInput(1, 0), false); // lobby
  sock.deliver(stateFrame(0, "countdown"));
  assert.equal(client.sendInput(1, 0), false); // countdown
  sock.deliver(stateFrame(1, "running"));
  assert.equal(client.sendInput(0.5, -0.5), true);
  const msg = JSON.parse(sock.sent.at(-1)!);
  assert.equal(msg.type, "input");
  assert.equal(msg.fx, 0.5);
  sock.deliver({ type: "episode_end", outcome: "timeout", duration_s: 60 });
  assert.equal(client.sendInput(1, 0), false); // ended
  assert.equal(client.sentInputs, 1);
});

test("disconnect drops back to lobby", () => {
  const { sock, client } = connectedClient();
  sock.deliver(stateFrame(1, "running"));
  let dropped = 0;
  (client as unknown as { events: { onDisconnect(): void } }).events.onDisconnect = () =>
    (dropped += 1);
  sock.close();
  assert.equal(client.phase, "lobby");
  assert.equal(client.sendInput(1, 0), false);
});

test("frame buffer interpolates between the freshest two frames", () => {
  const buf = new FrameBuffer();
  const a = stateFrame(0);
  const b = stateFrame(1);
  buf.push(a, 0);
  buf.push(b, 33.3);
  const mid = buf.poseAt(33.3, 33.3)!; // exactly at the latest frame's arrival
  assert.ok(mid.x >= a.x && mid.x <= b.x);
  const late = buf.poseAt(33.3 + 500, 33.3)!; // never extrapolates past latest
  assert.ok(Math.abs(late.x - b.x) < 1e-12);
});

class RecordingCtx {
  calls: string[] = [];
  fillStyle: string | CanvasGradient | CanvasPattern = "";
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  lineWidth = 0;
  font = "";
}

for (const name of [
  "clearRect", "fillRect", "beginPath", "moveTo", "lineTo", "arc",
  "closePath", "fill", "stroke", "save", "restore", "translate", "rotate",
  "fillText",
]) {
  (RecordingCtx.prototype as unknown as Record<string, unknown>)[name] = function (
    this: RecordingCtx,
  ) {
    this.calls.push(name);
  };
}

test("renderer replays 100 state frames without error", () => {
  const ctx = new RecordingCtx();
  const renderer = new WorldRenderer(MAP_INFO, { widthPx: 900, heightPx: 600 });
  for (let t = 0; t < 100; t++) {
    const f = stateFrame(t);
    renderer.renderFrame(
      ctx as unknown as import("../src/render.js").Draw2D,
      "m0",
      { x: f.x, y: f.y, theta: f.theta },
      f,
    );
  }
  assert.equal(ctx.calls.filter((c) => c === "clearRect").length, 100);
  assert.ok(ctx.calls.includes("fillRect")); // world + obstacles + table
  assert.ok(ctx.calls.includes("arc")); // goal ring + human circle
});

test("interaction gauge reads stretch and compress from echoed actions", () => {
  const base = stateFrame(0);
  base.theta = 0;
  base.action = { hfx: -0.8, hfy: 0, rfx: 0.8, rfy: 0 }; // pulling apart
  assert.ok(Math.abs(interactionGauge(base) - 0.8) < 1e-12);
  base.action = { hfx: 0.8, hfy: 0, rfx: -0.8, rfy: 0 }; // pushing together
  assert.ok(Math.abs(interactionGauge(base) + 0.8) < 1e-12);
  base.action = { hfx: 0.8, hfy: 0, rfx: 0.8, rfy: 0 }; // pure transport
  assert.equal(interactionGauge(base), 0);
});
