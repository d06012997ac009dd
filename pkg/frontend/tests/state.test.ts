import { describe, expect, it } from "vitest";

import { initialState, reduce, UiEvent, UiState } from "../src/state.js";
import { rollModel } from "../src/pianoroll.js";

function chain(...events: UiEvent[]): UiState {
  let s = initialState();
  for (const ev of events) s = reduce(s, ev);
  return s;
}

const CONNECTED: UiEvent[] = [
  { type: "connect", checkpoint: "desk", seed: ["P60", "HOLD"], tempoBpm: 60 },
  { type: "init_ack", ack: { session: "s1", checkpoint: "desk", seed: ["P60", "HOLD"], seedSteps: 2 } },
  { type: "transport", running: true },
];

describe("ticking", () => {
  it("sends REST when no key is held", () => {
    const s = chain(...CONNECTED, { type: "tick" });
    expect(s.outbox).toHaveLength(1);
    expect(s.outbox[0]?.payload).toEqual({ step: 0, token: "REST" });
    expect(s.lane1[0]).toBe("REST");
  });

  it("sends onset then holds while a key stays down", () => {
    let s = chain(...CONNECTED, { type: "key_down", midi: 60 });
    const tokens: string[] = [];
    for (let i = 0; i < 4; i++) {
      s = reduce(s, { type: "tick" });
      tokens.push(String(s.outbox[0]?.payload?.["token"]));
      s = reduce(s, { type: "step_ack", ack: { step: i, token: "P55" } });
    }
    expect(tokens).toEqual(["P60", "HOLD", "HOLD", "HOLD"]);
  });

  it("does not tick while stopped or disconnected", () => {
    const stopped = chain(...CONNECTED, { type: "transport", running: false }, { type: "tick" });
    expect(stopped.outbox).toHaveLength(0);
    const dropped = chain(...CONNECTED, { type: "disconnected" }, { type: "tick" });
    expect(dropped.outbox).toHaveLength(0);
    expect(dropped.transport).toBe("stopped");
    expect(dropped.banner).toMatch(/connection/);
  });

  it("never re-sends a step that is pending", () => {
    let s = chain(...CONNECTED, { type: "tick" });
    const again = reduce(s, { type: "tick" });
    expect(again.outbox).toHaveLength(0);
    expect(again.step).toBe(1);
  });
});

describe("acks", () => {
  it("renders machine tokens into the machine lane and emits tones", () => {
    let s = chain(...CONNECTED, { type: "tick" });
    s = reduce(s, { type: "step_ack", ack: { step: 0, token: "P64" } });
    expect(s.lane2[0]).toBe("P64");
    expect(s.tones).toEqual([{ kind: "onset", step: 0, midi: 64 }]);
    s = reduce(s, { type: "tick" });
    s = reduce(s, { type: "step_ack", ack: { step: 1, token: "P64_H" } });
    expect(s.lane2[1]).toBe("P64_H");
    expect(s.tones).toEqual([{ kind: "hold", step: 1 }]);
  });

  it("ignores duplicate acks idempotently", () => {
    let s = chain(...CONNECTED, { type: "tick" });
    s = reduce(s, { type: "step_ack", ack: { step: 0, token: "P64" } });
    const dup = reduce(s, { type: "step_ack", ack: { step: 0, token: "P70" } });
    expect(dup.lane2[0]).toBe("P64");
    expect(dup.tones).toHaveLength(0);
  });

  it("flags out-of-order acks and pauses", () => {
    let s = chain(...CONNECTED, { type: "tick" });
    s = reduce(s, { type: "step_ack", ack: { step: 5, token: "P64" } });
    expect(s.banner).toMatch(/out-of-order/);
    expect(s.transport).toBe("stopped");
  });
});

describe("role switching", () => {
  function runSteps(s: UiState, n: number): UiState {
    for (let i = 0; i < n; i++) {
      s = reduce(s, { type: "tick" });
      const step = Number(s.outbox.at(-1)?.payload?.["step"]);
      s = reduce(s, { type: "step_ack", ack: { step, token: "P40" } });
    }
    return s;
  }

  it("queues a mid-measure press until the next boundary", () => {
    let s = chain(...CONNECTED);
    s = runSteps(s, 37);
    s = reduce(s, { type: "switch_pressed" });
    expect(s.switchQueued).toBe(true);
    s = runSteps(s, 10);  // steps 37..46, no boundary yet
    expect(s.switchQueued).toBe(true);
    s = reduce(s, { type: "tick" });  // step 47
    expect(s.outbox.map((m) => m.kind)).toEqual(["STEP"]);
    s = reduce(s, { type: "step_ack", ack: { step: 47, token: "P40" } });
    s = reduce(s, { type: "tick" });  // step 48: boundary
    expect(s.outbox.map((m) => m.kind)).toEqual(["SWITCH", "STEP"]);
    expect(s.outbox[0]?.payload?.["step"]).toBe(48);
  });

  it("double press cancels: no message", () => {
    let s = chain(...CONNECTED);
    s = runSteps(s, 37);
    s = reduce(s, { type: "switch_pressed" });
    s = reduce(s, { type: "switch_pressed" });
    s = runSteps(s, 12);
    const kinds = new Set<string>();
    for (let i = 0; i < 12; i++) kinds.add("STEP");
    expect(s.switchQueued).toBe(false);
  });

  it("routes the boundary step and later input to the other lane", () => {
    let s = chain(...CONNECTED);
    s = runSteps(s, 48);
    s = reduce(s, { type: "switch_pressed" });
    s = reduce(s, { type: "tick" });  // emits SWITCH + STEP(48) under the new role
    expect(s.policyFills).toBe(1);
    expect(s.lane2[48]).toBe("REST");
    s = reduce(s, { type: "switch_ack", step: 48 });
    s = reduce(s, { type: "step_ack", ack: { step: 48, token: "P40" } });
    expect(s.lane1[48]).toBe("P40");
    s = reduce(s, { type: "tick" });
    expect(s.lane2[49]).toBe("REST");
    s = reduce(s, { type: "step_ack", ack: { step: 49, token: "P41" } });
    expect(s.lane1[49]).toBe("P41");
  });
});

describe("piano roll purity", () => {
  it("is a pure function of the lanes", () => {
    let s = chain(...CONNECTED, { type: "key_down", midi: 62 });
    s = reduce(s, { type: "tick" });
    s = reduce(s, { type: "step_ack", ack: { step: 0, token: "P64" } });
    const a = rollModel(s);
    const b = rollModel({ ...s, tones: [], outbox: [] });
    expect(a).toEqual(b);
    const cells = a.cells.filter((c) => c.step === 0);
    expect(cells).toContainEqual({ lane: 1, step: 0, midi: 62, onset: true });
    expect(cells).toContainEqual({ lane: 2, step: 0, midi: 64, onset: true });
  });

  it("carries hold pitches forward", () => {
    let s = chain(...CONNECTED);
    s = reduce(s, { type: "key_down", midi: 60 });
    s = reduce(s, { type: "tick" });
    s = reduce(s, { type: "step_ack", ack: { step: 0, token: "P64" } });
    s = reduce(s, { type: "tick" });
    s = reduce(s, { type: "step_ack", ack: { step: 1, token: "P64_H" } });
    const holds = rollModel(s).cells.filter((c) => c.lane === 2 && c.step === 1);
    expect(holds).toEqual([{ lane: 2, step: 1, midi: 64, onset: false }]);
    const humanHold = rollModel(s).cells.filter((c) => c.lane === 1 && c.step === 1);
    expect(humanHold).toEqual([{ lane: 1, step: 1, midi: 60, onset: false }]);
  });
});

describe("ending", () => {
  it("sends END once and freezes on server END", () => {
    let s = chain(...CONNECTED, { type: "end_pressed" });
    expect(s.outbox.map((m) => m.kind)).toEqual(["END"]);
    s = reduce(s, { type: "server_end" });
    expect(s.ended).toBe(true);
    const after = reduce(s, { type: "tick" });
    expect(after.outbox).toHaveLength(0);
  });
});
