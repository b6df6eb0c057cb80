// Browser bootstrap: connects to the server on the same origin, renders at
// display refresh, and streams keyboard/gamepad forces at 30 Hz while an
// episode runs.
import { SessionClient } from "./client.js";
import { InputTracker, attachKeyboard, pollGamepad } from "./input.js";
import { WorldRenderer, interactionGauge } from "./render.js";
const FRAME_MS = 1000 / 30;
function $(id) {
    const el = document.getElementById(id);
    if (!el)
        throw new Error(`missing element #${id}`);
    return el;
}
function wsUrl() {
    const proto = location.protocol === "https:" ? "wss" : "ws";
    return `${proto}://${location.host}/ws`;
}
function main() {
    const canvas = $("world");
    const ctx = canvas.getContext("2d");
    const banner = $("banner");
    const timer = $("timer");
    const gauge = $("gauge-needle");
    const mapSelect = $("map-select");
    const tracker = new InputTracker();
    attachKeyboard(tracker, window);
    let renderer = null;
    let reconnectDelay = 500;
    const client = new SessionClient(wsUrl(), (url) => new WebSocket(url), {
        onMapInfo(info) {
            renderer = new WorldRenderer(info, {
                widthPx: canvas.width,
                heightPx: canvas.height,
            });
            mapSelect.innerHTML = "";
            for (const m of info.maps) {
                const opt = document.createElement("option");
                opt.value = m.map_id;
                opt.textContent = m.map_id;
                mapSelect.appendChild(opt);
            }
            mapSelect.value = info.default_map;
            banner.textContent = "connected - press start";
            reconnectDelay = 500;
        },
        onPhase(phase) {
            banner.textContent = phase;
        },
        onEpisodeEnd(end) {
            banner.textContent = `${end.outcome} after ${end.duration_s.toFixed(1)} s`;
        },
        onError(message) {
            banner.textContent = `server error: ${message}`;
        },
        onDisconnect() {
            banner.textContent = "disconnected - retrying";
            setTimeout(() => client.connect(), reconnectDelay);
            reconnectDelay = Math.min(reconnectDelay * 2, 5000);
        },
    });
    client.connect();
    $("start").addEventListener("click", () => client.start(mapSelect.value));
    $("reset").addEventListener("click", () => client.reset());
    // input loop at the simulation rate
    setInterval(() => {
        const cmd = tracker.current(pollGamepad());
        client.sendInput(cmd.fx, cmd.fy);
    }, FRAME_MS);
    // render loop at display refresh
    const draw = () => {
        const frame = client.frames.current;
        if (renderer && frame) {
            const pose = client.frames.poseAt(Date.now(), FRAME_MS);
            if (pose) {
                renderer.renderFrame(ctx, mapSelect.value, pose, frame);
                timer.textContent = `${(frame.tick / 30).toFixed(1)} s`;
                const g = interactionGauge(frame);
                gauge.style.left = `${50 + g * 50}%`;
            }
        }
        requestAnimationFrame(draw);
    };
    requestAnimationFrame(draw);
}
window.addEventListener("DOMContentLoaded", main);
