// Wire protocol shared with the teleoperation server: one JSON message per
// websocket frame, every message tagged with protocol_version and session.
export const PROTOCOL_VERSION = "1";
export function parseServerMessage(raw) {
    let data;
    try {
        data = JSON.parse(raw);
    }
    catch {
        return null;
    }
    if (typeof data !== "object" || data === null)
        return null;
    const msg = data;
    switch (msg.type) {
        case "state":
        case "map_info":
        case "episode_end":
        case "error":
            return msg;
        default:
            return null;
    }
}
export function helloMessage() {
    return JSON.stringify({ type: "hello" });
}
export function startMessage(mapId) {
    return JSON.stringify({ type: "start", map_id: mapId });
}
export function resetMessage() {
    return JSON.stringify({ type: "reset" });
}
export function inputMessage(cmd) {
    return JSON.stringify({
        type: "input",
        fx: clampUnit(cmd.fx),
        fy: clampUnit(cmd.fy),
        seq: cmd.seq,
    });
}
export function clampUnit(v) {
    if (!Number.isFinite(v))
        return 0;
    return Math.max(-1, Math.min(1, v));
}
// Input is allowed on the wire only while an episode is actually running.
export function inputAllowed(phase) {
    return phase === "running";
}
