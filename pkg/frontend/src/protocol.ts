// Wire protocol shared with the teleoperation server: one JSON message per
// websocket frame, every message tagged with protocol_version and session.

export const PROTOCOL_VERSION = "1";

export type Phase = "lobby" | "countdown" | "running" | "ended";

export interface MapInfo {
  type: "map_info";
  maps: Array<{
    map_id: string;
    obstacles: Array<[number, number, number]>;
    initial_pose: [number, number, number];
    goal: [number, number];
  }>;
  default_map: string;
  world: {
    width: number;
    height: number;
    table_length: number;
    table_width: number;
    goal_radius: number;
  };
  rate_hz: number;
}

export interface StateFrame {
  type: "state";
  tick: number;
  phase: Phase;
  x: number;
  y: number;
  theta: number;
  vx: number;
  vy: number;
  omega: number;
  action: { hfx: number; hfy: number; rfx: number; rfy: number };
  event: string;
}

export interface EpisodeEnd {
  type: "episode_end";
  outcome: string;
  duration_s: number;
  aborted?: boolean;
  overruns?: number;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = (MapInfo | StateFrame | EpisodeEnd | ErrorMessage) & {
  protocol_version?: string;
  session?: string;
};

export interface InputCommand {
  fx: number;
  fy: number;
  seq: number;
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as Record<string, unknown>;
  switch (msg.type) {
    case "state":
    case "map_info":
    case "episode_end":
    case "error":
      return msg as unknown as ServerMessage;
    default:
      return null;
  }
}

export function helloMessage(): string {
  return JSON.stringify({ type: "hello" });
}

export function startMessage(mapId: string): string {
  return JSON.stringify({ type: "start", map_id: mapId });
}

export function resetMessage(): string {
  return JSON.stringify({ type: "reset" });
}

export function inputMessage(cmd: InputCommand): string {
  return JSON.stringify({
    type: "input",
    fx: clampUnit(cmd.fx),
    fy: clampUnit(cmd.fy),
    seq: cmd.seq,
  });
}

export function clampUnit(v: number): number {
  if (!Number.isFinite(v)) return 0;
  return Math.max(-1, Math.min(1, v));
}

// Input is allowed on the wire only while an episode is actually running.
export function inputAllowed(phase: Phase): boolean {
  return phase === "running";
}
