import { test } from "node:test";
import assert from "node:assert/strict";

import {
  clampUnit,
  helloMessage,
  inputAllowed,
  inputMessage,
  parseServerMessage,
  startMessage,
} from "../src/protocol.js";

test("clampUnit bounds and sanitizes", () => {
  assert.equal(clampUnit(0.5), 0.5);
  assert.equal(clampUnit(2.0), 1);
  assert.equal(clampUnit(-3.5), -1);
  assert.equal(clampUnit(Number.NaN), 0);
  assert.equal(clampUnit(Infinity), 0);
});

test("input messages clamp their forces", () => {
  const msg = JSON.parse(inputMessage({ fx: 1.7, fy: -0.25, seq: 9 }));
  assert.deepEqual(msg, { type: "input", fx: 1, fy: -0.25, seq: 9 });
});

test("outgoing control messages have the right tags", () => {
  assert.equal(JSON.parse(helloMessage()).type, "hello");
  const start = JSON.parse(startMessage("train01"));
  assert.equal(start.type, "start");
  assert.equal(start.map_id, "train01");
});

test("parse rejects junk and unknown types", () => {
  assert.equal(parseServerMessage("not json"), null);
  assert.equal(parseServerMessage('{"type":"warp"}'), null);
  assert.equal(parseServerMessage('"just a string"'), null);
  const ok = parseServerMessage('{"type":"state","tick":3,"phase":"running"}');
  assert.equal(ok?.type, "state");
});

test("input is phase gated to running only", () => {
  assert.equal(inputAllowed("running"), true);
  assert.equal(inputAllowed("lobby"), false);
  assert.equal(inputAllowed("countdown"), false);
  assert.equal(inputAllowed("ended"), false);
});
