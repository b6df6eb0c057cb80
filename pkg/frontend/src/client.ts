// Session client: owns the websocket, mirrors the server's phase machine,
// sends inputs only while running, and reconnects with a fresh session
// after a drop. The socket is injected so tests can run headless.

import {
  EpisodeEnd,
  MapInfo,
  Phase,
  ServerMessage,
  StateFrame,
  helloMessage,
  inputAllowed,
  inputMessage,
  parseServerMessage,
  resetMessage,
  startMessage,
} from "./protocol.js";
import { FrameBuffer } from "./interpolate.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientEvents {
  onMapInfo?(info: MapInfo): void;
  onEpisodeEnd?(end: EpisodeEnd): void;
  onPhase?(phase: Phase): void;
  onError?(message: string): void;
  onDisconnect?(): void;
}

export class SessionClient {
  phase: Phase = "lobby";
  mapInfo: MapInfo | null = null;
  frames = new FrameBuffer();
  lastEnd: EpisodeEnd | null = null;
  sentInputs = 0;
  private socket: SocketLike | null = null;
  private seq = 0;
  private connected = false;

  constructor(
    private url: string,
    private makeSocket: SocketFactory,
    private events: ClientEvents = {},
    private now: () => number = () => Date.now(),
  ) {}

  connect(): void {
    const sock = this.makeSocket(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.connected = true;
      sock.send(helloMessage());
    };
    sock.onmessage = (ev) => this.handleRaw(ev.data);
    sock.onclose = () => {
      this.connected = false;
      this.setPhase("lobby");
      this.events.onDisconnect?.();
    };
  }

  handleRaw(raw: string): void {
    const msg = parseServerMessage(raw);
    if (!msg) return;
    this.handle(msg);
  }

  handle(msg: ServerMessage): void {
    switch (msg.type) {
      case "map_info":
        this.mapInfo = msg;
        this.events.onMapInfo?.(msg);
        break;
      case "state":
        this.frames.push(msg as StateFrame, this.now());
        this.setPhase((msg as StateFrame).phase);
        break;
      case "episode_end":
        this.lastEnd = msg as EpisodeEnd;
        this.setPhase("ended");
        this.events.onEpisodeEnd?.(msg as EpisodeEnd);
        break;
      case "error":
        this.events.onError?.(msg.message);
        break;
    }
  }

  private setPhase(phase: Phase): void {
    if (phase !== this.phase) {
      this.phase = phase;
      this.events.onPhase?.(phase);
    }
  }

  start(mapId: string): void {
    this.socket?.send(startMessage(mapId));
  }

  reset(): void {
    this.socket?.send(resetMessage());
  }

  /** Send a force command; silently dropped outside the running phase. */
  sendInput(fx: number, fy: number): boolean {
    if (!this.connected || !inputAllowed(this.phase)) return false;
    this.seq += 1;
    this.socket?.send(inputMessage({ fx, fy, seq: this.seq }));
    this.sentInputs += 1;
    return true;
  }
}
