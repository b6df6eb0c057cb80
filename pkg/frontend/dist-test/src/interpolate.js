// Two-frame interpolation buffer: rendering lags one server frame and
// lerps between the two freshest states, clamped so the pose is never
// extrapolated more than two frames past the last message.
function lerpAngle(a, b, t) {
    let d = (b - a) % (2 * Math.PI);
    if (d > Math.PI)
        d -= 2 * Math.PI;
    if (d < -Math.PI)
        d += 2 * Math.PI;
    return a + d * t;
}
export class FrameBuffer {
    prev = null;
    latest = null;
    latestAt = 0; // client clock, ms
    push(frame, nowMs) {
        this.prev = this.latest;
        this.latest = frame;
        this.latestAt = nowMs;
    }
    get current() {
        return this.latest;
    }
    /** Interpolated pose for rendering at client time nowMs. */
    poseAt(nowMs, frameMs) {
        if (!this.latest)
            return null;
        if (!this.prev) {
            return { x: this.latest.x, y: this.latest.y, theta: this.latest.theta };
        }
        // 0 = previous frame, 1 = latest frame; never run more than 2 frames ahead
        const t = Math.min((nowMs - this.latestAt) / frameMs + 1, 2);
        const a = this.prev;
        const b = this.latest;
        const f = Math.max(0, Math.min(t, 2)) > 1 ? 1 : Math.max(0, t);
        return {
            x: a.x + (b.x - a.x) * f,
            y: a.y + (b.y - a.y) * f,
            theta: lerpAngle(a.theta, b.theta, f),
        };
    }
}
