// Session client: owns the websocket, mirrors the server's phase machine,
// sends inputs only while running, and reconnects with a fresh session
// after a drop. The socket is injected so tests can run headless.
import { helloMessage, inputAllowed, inputMessage, parseServerMessage, resetMessage, startMessage, } from "./protocol.js";
import { FrameBuffer } from "./interpolate.js";
export class SessionClient {
    url;
    makeSocket;
    events;
    now;
    phase = "lobby";
    mapInfo = null;
    frames = new FrameBuffer();
    lastEnd = null;
    sentInputs = 0;
    socket = null;
    seq = 0;
    connected = false;
    constructor(url, makeSocket, events = {}, now = () => Date.now()) {
        this.url = url;
        this.makeSocket = makeSocket;
        this.events = events;
        this.now = now;
    }
    connect() {
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
    handleRaw(raw) {
        const msg = parseServerMessage(raw);
        if (!msg)
            return;
        this.handle(msg);
    }
    handle(msg) {
        switch (msg.type) {
            case "map_info":
                this.mapInfo = msg;
                this.events.onMapInfo?.(msg);
                break;
            case "state":
                this.frames.push(msg, this.now());
                this.setPhase(msg.phase);
                break;
            case "episode_end":
                this.lastEnd = msg;
                this.setPhase("ended");
                this.events.onEpisodeEnd?.(msg);
                break;
            case "error":
                this.events.onError?.(msg.message);
                break;
        }
    }
    setPhase(phase) {
        if (phase !== this.phase) {
            this.phase = phase;
            this.events.onPhase?.(phase);
        }
    }
    start(mapId) {
        this.socket?.send(startMessage(mapId));
    }
    reset() {
        this.socket?.send(resetMessage());
    }
    /** Send a force command; silently dropped outside the running phase. */
    sendInput(fx, fy) {
        if (!this.connected || !inputAllowed(this.phase))
            return false;
        this.seq += 1;
        this.socket?.send(inputMessage({ fx, fy, seq: this.seq }));
        this.sentInputs += 1;
        return true;
    }
}
