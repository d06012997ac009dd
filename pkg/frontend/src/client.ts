// Websocket shell around the reducer: drains outbox frames, translates server
// frames into events, and drives one tick per sixteenth note at the set tempo.

import { parseServerMessage, stepAckOf, WireMessage } from "./protocol.js";
import { initialState, reduce, UiEvent, UiState } from "./state.js";

export type Listener = (state: UiState) => void;

export class DuetClient {
  state: UiState = initialState();
  private ws: WebSocket | null = null;
  private timer: number | null = null;
  private listeners: Listener[] = [];

  constructor(private url: string) {}

  onChange(fn: Listener): void {
    this.listeners.push(fn);
  }

  dispatch(ev: UiEvent): void {
    this.state = reduce(this.state, ev);
    for (const frame of this.state.outbox) this.sendFrame(frame);
    for (const fn of this.listeners) fn(this.state);
  }

  connect(checkpoint: string, seed: string[], tempoBpm: number): void {
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => this.dispatch({ type: "connect", checkpoint, seed, tempoBpm });
    ws.onmessage = (ev) => this.onFrame(String(ev.data));
    ws.onclose = () => {
      this.stopTicking();
      this.dispatch({ type: "disconnected" });
    };
  }

  private sendFrame(frame: WireMessage): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(frame));
    }
  }

  private onFrame(raw: string): void {
    let msg: WireMessage;
    try {
      msg = parseServerMessage(raw);
    } catch (e) {
      this.dispatch({ type: "server_error", code: "E_CLIENT", message: String(e) });
      return;
    }
    if (msg.kind === "INIT_ACK") {
      const p = msg.payload ?? {};
      this.dispatch({
        type: "init_ack",
        ack: {
          session: msg.session ?? "",
          checkpoint: String(p["checkpoint"] ?? ""),
          seed: (p["seed"] as string[]) ?? [],
          seedSteps: Number(p["seed_steps"] ?? 0),
        },
      });
    } else if (msg.kind === "STEP_ACK") {
      this.dispatch({ type: "step_ack", ack: stepAckOf(msg) });
    } else if (msg.kind === "SWITCH_ACK") {
      this.dispatch({ type: "switch_ack", step: Number((msg.payload ?? {})["step"]) });
    } else if (msg.kind === "END") {
      this.dispatch({ type: "server_end" });
    } else {
      const p = msg.payload ?? {};
      this.dispatch({
        type: "server_error",
        code: String(p["code"] ?? "E_UNKNOWN"),
        message: String(p["message"] ?? ""),
      });
    }
  }

  setTransport(running: boolean): void {
    this.dispatch({ type: "transport", running });
    if (running) this.startTicking();
    else this.stopTicking();
  }

  private startTicking(): void {
    this.stopTicking();
    const interval = 60000 / this.state.tempoBpm / 4;
    this.timer = setInterval(() => this.dispatch({ type: "tick" }), interval) as unknown as number;
  }

  private stopTicking(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
