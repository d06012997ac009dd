// Wire schema v1 for the duet session service: JSON text frames over one
// websocket, one session per connection. Step indices start at 0 and move by
// exactly 1; the machine part's first `seedSteps` acks echo the seed.

export const WIRE_VERSION = 1;

export type ClientKind = "INIT" | "STEP" | "SWITCH" | "END";
export type ServerKind = "INIT_ACK" | "STEP_ACK" | "SWITCH_ACK" | "END" | "ERROR";

export interface WireMessage {
  v: number;
  kind: ClientKind | ServerKind;
  session?: string;
  payload?: Record<string, unknown>;
}

export interface InitAck {
  session: string;
  checkpoint: string;
  seed: string[];
  seedSteps: number;
}

export interface StepAck {
  step: number;
  token: string;
}

export const PITCH_MIN = 36;
export const PITCH_MAX = 81;

export function pitchLabel(midi: number): string {
  if (!Number.isInteger(midi) || midi < PITCH_MIN || midi > PITCH_MAX) {
    throw new Error(`pitch ${midi} outside [${PITCH_MIN}, ${PITCH_MAX}]`);
  }
  return `P${midi}`;
}

// Sounding pitch named by a token label, or null for PAD/REST/HOLD.
export function labelPitch(label: string): number | null {
  const m = /^P(\d+)(_H)?$/.exec(label);
  return m ? Number(m[1]) : null;
}

export function isHoldLabel(label: string): boolean {
  return label === "HOLD" || /_H$/.test(label);
}

export function initMessage(checkpoint: string, seed: string[], tempoBpm: number): WireMessage {
  return { v: WIRE_VERSION, kind: "INIT", payload: { checkpoint, seed, tempo: tempoBpm } };
}

export function stepMessage(session: string, step: number, token: string): WireMessage {
  return { v: WIRE_VERSION, kind: "STEP", session, payload: { step, token } };
}

export function switchMessage(session: string, step: number): WireMessage {
  return { v: WIRE_VERSION, kind: "SWITCH", session, payload: { step } };
}

export function endMessage(session: string): WireMessage {
  return { v: WIRE_VERSION, kind: "END", session };
}

export function parseServerMessage(raw: string): WireMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    throw new Error("server frame is not JSON");
  }
  if (typeof obj !== "object" || obj === null) {
    throw new Error("server frame is not an object");
  }
  const msg = obj as WireMessage;
  if (msg.v !== WIRE_VERSION) {
    throw new Error(`unsupported wire version ${String(msg.v)}`);
  }
  if (!["INIT_ACK", "STEP_ACK", "SWITCH_ACK", "END", "ERROR"].includes(msg.kind)) {
    throw new Error(`unexpected server kind ${String(msg.kind)}`);
  }
  return msg;
}

export function stepAckOf(msg: WireMessage): StepAck {
  const p = msg.payload ?? {};
  const step = p["step"];
  const token = p["token"];
  if (typeof step !== "number" || typeof token !== "string") {
    throw new Error("malformed STEP_ACK payload");
  }
  return { step, token };
}
