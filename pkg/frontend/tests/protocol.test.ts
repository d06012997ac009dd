import { describe, expect, it } from "vitest";

import {
  initMessage,
  isHoldLabel,
  labelPitch,
  parseServerMessage,
  pitchLabel,
  stepAckOf,
  stepMessage,
} from "../src/protocol.js";

describe("token labels", () => {
  it("formats and parses pitch labels", () => {
    expect(pitchLabel(60)).toBe("P60");
    expect(labelPitch("P60")).toBe(60);
    expect(labelPitch("P60_H")).toBe(60);
    expect(labelPitch("REST")).toBeNull();
    expect(labelPitch("HOLD")).toBeNull();
    expect(labelPitch("PAD")).toBeNull();
  });

  it("rejects out-of-range pitches", () => {
    expect(() => pitchLabel(35)).toThrow();
    expect(() => pitchLabel(82)).toThrow();
    expect(() => pitchLabel(60.5)).toThrow();
  });

  it("classifies holds", () => {
    expect(isHoldLabel("HOLD")).toBe(true);
    expect(isHoldLabel("P44_H")).toBe(true);
    expect(isHoldLabel("P44")).toBe(false);
    expect(isHoldLabel("REST")).toBe(false);
  });
});

describe("wire frames", () => {
  it("builds versioned client frames", () => {
    expect(initMessage("desk", ["P60"], 60)).toEqual({
      v: 1,
      kind: "INIT",
      payload: { checkpoint: "desk", seed: ["P60"], tempo: 60 },
    });
    expect(stepMessage("s1", 4, "REST").payload).toEqual({ step: 4, token: "REST" });
  });

  it("parses server frames and rejects junk", () => {
    const ok = parseServerMessage('{"v":1,"kind":"STEP_ACK","session":"s1","payload":{"step":3,"token":"P60"}}');
    expect(stepAckOf(ok)).toEqual({ step: 3, token: "P60" });
    expect(() => parseServerMessage("nope")).toThrow();
    expect(() => parseServerMessage('{"v":2,"kind":"STEP_ACK"}')).toThrow();
    expect(() => parseServerMessage('{"v":1,"kind":"STEP"}')).toThrow();
    expect(() => stepAckOf(parseServerMessage('{"v":1,"kind":"STEP_ACK","payload":{}}'))).toThrow();
  });
});
