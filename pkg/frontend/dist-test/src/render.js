// Canvas rendering of the world: obstacles as red squares, the goal as a
// green marker, the table with its orientation, the human end as an orange
// circle and the robot end as a blue triangle, plus force arrows and a
// small interaction-force gauge. Everything drawn comes straight from
// server messages; no physics runs client-side.
//
// Drawing goes through the Draw2D subset of CanvasRenderingContext2D so a
// headless test can replay message fixtures against a recording stub.
export class WorldRenderer {
    info;
    view;
    constructor(info, view) {
        this.info = info;
        this.view = view;
    }
    get scale() {
        return Math.min(this.view.widthPx / this.info.world.width, this.view.heightPx / this.info.world.height);
    }
    /** World (y up) to canvas (y down) coordinates. */
    toPx(x, y) {
        const s = this.scale;
        return [x * s, this.view.heightPx - y * s];
    }
    renderFrame(ctx, mapId, pose, frame) {
        const { world } = this.info;
        const s = this.scale;
        ctx.clearRect(0, 0, this.view.widthPx, this.view.heightPx);
        ctx.fillStyle = "#20242b";
        ctx.fillRect(0, 0, world.width * s, world.height * s);
        const map = this.info.maps.find((m) => m.map_id === mapId) ?? this.info.maps[0];
        for (const [ox, oy, side] of map.obstacles) {
            const [px, py] = this.toPx(ox - side / 2, oy + side / 2);
            ctx.fillStyle = "#d43f3f";
            ctx.fillRect(px, py, side * s, side * s);
        }
        const [gx, gy] = this.toPx(map.goal[0], map.goal[1]);
        ctx.strokeStyle = "#46d46a";
        ctx.lineWidth = 3;
        ctx.beginPath();
        ctx.arc(gx, gy, world.goal_radius * s, 0, 2 * Math.PI);
        ctx.stroke();
        this.renderTable(ctx, pose);
        this.renderForces(ctx, pose, frame);
    }
    renderTable(ctx, pose) {
        const { world } = this.info;
        const s = this.scale;
        const [cx, cy] = this.toPx(pose.x, pose.y);
        ctx.save();
        ctx.translate(cx, cy);
        ctx.rotate(-pose.theta); // canvas y is flipped
        const len = world.table_length * s;
        const wid = world.table_width * s;
        ctx.fillStyle = "#c9a35e";
        ctx.fillRect(-len / 2, -wid / 2, len, wid);
        // human end: orange circle at -L/2
        ctx.fillStyle = "#f09b2e";
        ctx.beginPath();
        ctx.arc(-len / 2, 0, Math.max(5, wid * 0.55), 0, 2 * Math.PI);
        ctx.fill();
        // robot end: blue triangle at +L/2, pointing outward
        const r = Math.max(6, wid * 0.6);
        ctx.fillStyle = "#3c78e0";
        ctx.beginPath();
        ctx.moveTo(len / 2 + r, 0);
        ctx.lineTo(len / 2 - r * 0.6, -r * 0.8);
        ctx.lineTo(len / 2 - r * 0.6, r * 0.8);
        ctx.closePath();
        ctx.fill();
        ctx.restore();
    }
    renderForces(ctx, pose, frame) {
        const s = this.scale;
        const arrow = (x, y, fx, fy, color) => {
            if (fx === 0 && fy === 0)
                return;
            const [px, py] = this.toPx(x, y);
            ctx.strokeStyle = color;
            ctx.lineWidth = 2;
            ctx.beginPath();
            ctx.moveTo(px, py);
            ctx.lineTo(px + fx * s, py - fy * s);
            ctx.stroke();
        };
        const half = this.info.world.table_length / 2;
        const hx = pose.x - Math.cos(pose.theta) * half;
        const hy = pose.y - Math.sin(pose.theta) * half;
        const rx = pose.x + Math.cos(pose.theta) * half;
        const ry = pose.y + Math.sin(pose.theta) * half;
        arrow(hx, hy, frame.action.hfx, frame.action.hfy, "#f09b2e");
        arrow(rx, ry, frame.action.rfx, frame.action.rfy, "#3c78e0");
    }
}
/**
 * Signed interaction force from the echoed actions: the axial halves of
 * the two grip forces that cancel in the net force (positive = stretch).
 */
export function interactionGauge(frame) {
    const ux = Math.cos(frame.theta);
    const uy = Math.sin(frame.theta);
    const aH = frame.action.hfx * ux + frame.action.hfy * uy;
    const aR = frame.action.rfx * ux + frame.action.rfy * uy;
    return Math.max(-1, Math.min(1, 0.5 * (aR - aH)));
}
