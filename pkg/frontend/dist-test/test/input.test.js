import { test } from "node:test";
import assert from "node:assert/strict";
import { InputTracker, combineInputs, keysToForce, stickToForce, } from "../src/input.js";
test("keyboard diagonals are normalized to unit magnitude", () => {
    const f = keysToForce({ up: true, down: false, left: false, right: true });
    assert.ok(Math.abs(Math.hypot(f.fx, f.fy) - 1) < 1e-12);
    assert.ok(f.fx > 0 && f.fy > 0);
});
test("opposing keys cancel", () => {
    const f = keysToForce({ up: true, down: true, left: true, right: true });
    assert.deepEqual(f, { fx: 0, fy: 0 });
});
test("stick deadzone swallows small deflections", () => {
    assert.deepEqual(stickToForce(0.05, 0.05), { fx: 0, fy: 0 });
    assert.deepEqual(stickToForce(0.0, 0.0), { fx: 0, fy: 0 });
});
test("stick input flips the y axis and stays within unit length", () => {
    const f = stickToForce(0.6, -0.6);
    assert.ok(f.fx > 0 && f.fy > 0); // stick up = negative axis = world +y
    const big = stickToForce(1.0, 1.0);
    assert.ok(Math.hypot(big.fx, big.fy) <= 1 + 1e-12);
});
test("the stronger source wins when combining", () => {
    const kb = { fx: 1, fy: 0 };
    const pad = { fx: 0.2, fy: 0.1 };
    assert.deepEqual(combineInputs(kb, pad), kb);
    const hardPad = { fx: 0, fy: -1 };
    assert.deepEqual(combineInputs({ fx: 0.1, fy: 0 }, hardPad), hardPad);
});
test("tracker maps arrows and wasd and reports activity", () => {
    const t = new InputTracker();
    assert.equal(t.active, false);
    assert.equal(t.handleKey("ArrowUp", true), true);
    assert.equal(t.handleKey("d", true), true);
    assert.equal(t.handleKey("x", true), false);
    assert.equal(t.active, true);
    const f = t.current(null);
    assert.ok(f.fx > 0 && f.fy > 0);
    t.handleKey("ArrowUp", false);
    t.handleKey("d", false);
    assert.equal(t.active, false);
});
test("tracker prefers a working gamepad over idle keys", () => {
    const t = new InputTracker();
    const f = t.current({ axes: [0.8, 0.0] });
    assert.ok(f.fx > 0.7);
});
