// Pure session-state reducer. Every UI mutation happens here, in response to
// tick/key/server events; the websocket layer just forwards `outbox` frames
// and the renderer just draws `lane1`/`lane2`. Replaying an acknowledged
// transcript through this reducer reproduces the piano roll exactly.

import {
  InitAck,
  StepAck,
  WireMessage,
  endMessage,
  initMessage,
  isHoldLabel,
  pitchLabel,
  stepMessage,
  switchMessage,
} from "./protocol.js";

export const STEPS_PER_MEASURE = 16;

export type ToneEvent =
  | { kind: "onset"; step: number; midi: number }
  | { kind: "hold"; step: number }
  | { kind: "off"; step: number };

export interface UiState {
  connection: "idle" | "open" | "closed";
  session: string | null;
  checkpoint: string;
  seed: string[];
  seedSteps: number;
  tempoBpm: number;
  transport: "stopped" | "running";
  step: number; // next step index to send
  lane1: (string | null)[]; // part 1: the human's stream at session start
  lane2: (string | null)[]; // part 2: the machine's stream at session start
  pendingSteps: Record<number, string>; // sent, not yet acknowledged
  heldPitch: number | null;
  heldSince: number | null; // step of the current press's onset, once sent
  policyFills: 1 | 2;
  switchQueued: boolean;
  banner: string | null;
  ended: boolean;
  outbox: WireMessage[];
  tones: ToneEvent[];
}

export type UiEvent =
  | { type: "connect"; checkpoint: string; seed: string[]; tempoBpm: number }
  | { type: "init_ack"; ack: InitAck }
  | { type: "tick" }
  | { type: "step_ack"; ack: StepAck }
  | { type: "switch_ack"; step: number }
  | { type: "server_error"; code: string; message: string }
  | { type: "server_end" }
  | { type: "key_down"; midi: number }
  | { type: "key_up" }
  | { type: "switch_pressed" }
  | { type: "transport"; running: boolean }
  | { type: "end_pressed" }
  | { type: "disconnected" };

export function initialState(): UiState {
  return {
    connection: "idle",
    session: null,
    checkpoint: "",
    seed: [],
    seedSteps: 0,
    tempoBpm: 60,
    transport: "stopped",
    step: 0,
    lane1: [],
    lane2: [],
    pendingSteps: {},
    heldPitch: null,
    heldSince: null,
    policyFills: 2,
    switchQueued: false,
    banner: null,
    ended: false,
    outbox: [],
    tones: [],
  };
}

function put(lane: (string | null)[], step: number, label: string): (string | null)[] {
  const next = lane.slice();
  while (next.length <= step) next.push(null);
  next[step] = label;
  return next;
}

// Which lane the human writes at the current role assignment.
function humanLane(s: UiState): 1 | 2 {
  return s.policyFills === 2 ? 1 : 2;
}

function currentToken(s: UiState): string {
  if (s.heldPitch === null) return "REST";
  if (s.heldSince !== null && s.heldSince < s.step) return "HOLD";
  return pitchLabel(s.heldPitch);
}

export function reduce(state: UiState, event: UiEvent): UiState {
  const s: UiState = { ...state, outbox: [], tones: [] };
  switch (event.type) {
    case "connect": {
      s.connection = "open";
      s.checkpoint = event.checkpoint;
      s.seed = event.seed.slice();
      s.tempoBpm = event.tempoBpm;
      s.outbox = [initMessage(event.checkpoint, event.seed, event.tempoBpm)];
      return s;
    }
    case "init_ack": {
      s.session = event.ack.session;
      s.seedSteps = event.ack.seedSteps;
      // the machine lane's seed region is known up front; render it pending
      let lane2 = s.lane2;
      event.ack.seed.forEach((label, i) => {
        lane2 = put(lane2, i, label);
      });
      s.lane2 = lane2;
      return s;
    }
    case "tick": {
      if (s.transport !== "running" || s.connection !== "open" || !s.session || s.ended) {
        return s;
      }
      // one outstanding step: lanes may never diverge by more than one, and a
      // step that already has an ack must never be re-sent
      if (Object.keys(s.pendingSteps).length > 0) return s;
      const outbox: WireMessage[] = [];
      if (s.switchQueued && s.step % STEPS_PER_MEASURE === 0 && s.step >= s.seedSteps) {
        outbox.push(switchMessage(s.session, s.step));
        s.switchQueued = false;
        // the engine honors the switch before this tick's step, so route the
        // step we are about to send under the new role already
        s.policyFills = s.policyFills === 2 ? 1 : 2;
      }
      const token = currentToken(s);
      if (s.heldPitch !== null && s.heldSince === null) s.heldSince = s.step;
      outbox.push(stepMessage(s.session, s.step, token));
      s.pendingSteps = { ...s.pendingSteps, [s.step]: token };
      const lane = humanLane(s);
      if (lane === 1) s.lane1 = put(s.lane1, s.step, token);
      else s.lane2 = put(s.lane2, s.step, token);
      s.step += 1;
      s.outbox = outbox;
      return s;
    }
    case "step_ack": {
      const { step, token } = event.ack;
      const machine = humanLane(s) === 1 ? 2 : 1;
      const laneArr = machine === 1 ? s.lane1 : s.lane2;
      if (laneArr[step] != null && !(step in s.pendingSteps)) {
        return s; // duplicate ack: idempotent
      }
      if (!(step in s.pendingSteps)) {
        s.banner = `out-of-order ack for step ${step}`;
        s.transport = "stopped";
        return s;
      }
      const pending = { ...s.pendingSteps };
      delete pending[step];
      s.pendingSteps = pending;
      if (machine === 1) s.lane1 = put(s.lane1, step, token);
      else s.lane2 = put(s.lane2, step, token);
      s.tones = [toneFor(token, step)];
      return s;
    }
    case "switch_ack": {
      return s; // confirmation only: the role flipped when the SWITCH was sent
    }
    case "server_error": {
      s.banner = `${event.code}: ${event.message}`;
      if (event.code === "E_ORDER" || event.code === "E_STATE") {
        s.transport = "stopped";
      }
      return s;
    }
    case "server_end": {
      s.ended = true;
      s.transport = "stopped";
      return s;
    }
    case "key_down": {
      s.heldPitch = event.midi;
      s.heldSince = null;
      return s;
    }
    case "key_up": {
      s.heldPitch = null;
      s.heldSince = null;
      return s;
    }
    case "switch_pressed": {
      s.switchQueued = !s.switchQueued; // double press before the boundary = no-op
      return s;
    }
    case "transport": {
      if (!s.ended) s.transport = event.running ? "running" : "stopped";
      return s;
    }
    case "end_pressed": {
      if (s.session && !s.ended) {
        s.outbox = [endMessage(s.session)];
      }
      return s;
    }
    case "disconnected": {
      s.connection = "closed";
      s.transport = "stopped";
      s.banner = "connection lost";
      return s;
    }
  }
}

function toneFor(label: string, step: number): ToneEvent {
  if (isHoldLabel(label)) return { kind: "hold", step };
  const m = /^P(\d+)$/.exec(label);
  if (m) return { kind: "onset", step, midi: Number(m[1]) };
  return { kind: "off", step };
}

// Replay a finished two-sided transcript (client frames + server frames, in
// exchange order). The recorded client frames drive key/tick/switch events;
// every frame the reducer emits consumes and applies exactly one server
// reply, so a tick that emits [SWITCH, STEP] pairs with both its replies.
// Returns the final state plus the regenerated client frames for comparison.
export function replayTranscript(
  client: WireMessage[],
  server: WireMessage[],
): { state: UiState; sent: WireMessage[] } {
  let state = initialState();
  const sent: WireMessage[] = [];
  const serverQueue = server.slice();

  const applyServer = (msg: WireMessage | undefined) => {
    if (!msg) return;
    if (msg.kind === "INIT_ACK") {
      const p = msg.payload ?? {};
      state = reduce(state, {
        type: "init_ack",
        ack: {
          session: msg.session ?? "",
          checkpoint: String(p["checkpoint"] ?? ""),
          seed: (p["seed"] as string[]) ?? [],
          seedSteps: Number(p["seed_steps"] ?? 0),
        },
      });
    } else if (msg.kind === "STEP_ACK") {
      const p = msg.payload ?? {};
      state = reduce(state, {
        type: "step_ack",
        ack: { step: Number(p["step"]), token: String(p["token"]) },
      });
    } else if (msg.kind === "SWITCH_ACK") {
      state = reduce(state, { type: "switch_ack", step: Number((msg.payload ?? {})["step"]) });
    } else if (msg.kind === "END") {
      state = reduce(state, { type: "server_end" });
    } else if (msg.kind === "ERROR") {
      const p = msg.payload ?? {};
      state = reduce(state, {
        type: "server_error",
        code: String(p["code"]),
        message: String(p["message"]),
      });
    }
  };

  const apply = (ev: UiEvent) => {
    state = reduce(state, ev);
    for (const frame of state.outbox) {
      sent.push(frame);
      applyServer(serverQueue.shift());
    }
  };

  for (const msg of client) {
    if (msg.kind === "INIT") {
      const p = msg.payload ?? {};
      apply({
        type: "connect",
        checkpoint: String(p["checkpoint"] ?? ""),
        seed: (p["seed"] as string[]) ?? [],
        tempoBpm: Number(p["tempo"] ?? 60),
      });
      state = reduce(state, { type: "transport", running: true });
    } else if (msg.kind === "SWITCH") {
      // recorded at the boundary tick that emitted it: queue the press, the
      // next STEP frame's tick re-emits it
      state = reduce(state, { type: "switch_pressed" });
    } else if (msg.kind === "STEP") {
      const token = String((msg.payload ?? {})["token"]);
      const midi = /^P(\d+)$/.exec(token);
      if (midi) {
        state = reduce(state, { type: "key_down", midi: Number(midi[1]) });
      } else if (token === "REST") {
        state = reduce(state, { type: "key_up" });
      } // HOLD: keep the current key held
      apply({ type: "tick" });
    } else if (msg.kind === "END") {
      apply({ type: "end_pressed" });
    }
  }
  return { state, sent };
}
