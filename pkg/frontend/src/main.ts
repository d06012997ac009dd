// Page bootstrap: keyboard note entry, transport, role switch, roll painting.

import { OscillatorSink } from "./audio.js";
import { applyTones } from "./audio.js";
import { DuetClient } from "./client.js";
import { paintRoll } from "./pianoroll.js";

// home-row keyboard mapped to a C-major-ish octave around middle C
const KEY_TO_MIDI: Record<string, number> = {
  z: 55, x: 57, c: 59, v: 60, b: 62, n: 64, m: 65,
  a: 60, s: 62, d: 64, f: 65, g: 67, h: 69, j: 71, k: 72, l: 74,
};

const DEFAULT_SEED = [
  "P60", "HOLD", "HOLD", "HOLD", "P64", "HOLD", "HOLD", "HOLD",
  "P67", "HOLD", "HOLD", "HOLD", "P64", "HOLD", "HOLD", "HOLD",
  "P65", "HOLD", "HOLD", "HOLD", "P62", "HOLD", "HOLD", "HOLD",
  "P60", "HOLD", "HOLD", "HOLD", "HOLD", "HOLD", "HOLD", "HOLD",
];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function main(): void {
  const wsUrl = `ws://${location.host}/ws`;
  const client = new DuetClient(wsUrl);
  const roll = el<HTMLDivElement>("roll");
  const banner = el<HTMLDivElement>("banner");
  const stepCounter = el<HTMLSpanElement>("step");
  let sink: OscillatorSink | null = null;

  client.onChange((state) => {
    paintRoll(roll, state);
    stepCounter.textContent = String(state.step);
    banner.textContent = state.banner ?? "";
    banner.style.display = state.banner ? "block" : "none";
    if (sink) applyTones(state.tones, sink);
  });

  el<HTMLButtonElement>("connect").onclick = () => {
    const tempo = Number(el<HTMLInputElement>("tempo").value) || 60;
    client.connect("", DEFAULT_SEED, tempo);
    const ctx = new AudioContext();
    sink = new OscillatorSink(ctx, tempo);
  };
  el<HTMLButtonElement>("play").onclick = () => client.setTransport(true);
  el<HTMLButtonElement>("stop").onclick = () => client.setTransport(false);
  el<HTMLButtonElement>("switch").onclick = () => client.dispatch({ type: "switch_pressed" });
  el<HTMLButtonElement>("finish").onclick = () => client.dispatch({ type: "end_pressed" });

  window.addEventListener("keydown", (ev) => {
    if (ev.repeat) return;
    const midi = KEY_TO_MIDI[ev.key];
    if (midi !== undefined) client.dispatch({ type: "key_down", midi });
  });
  window.addEventListener("keyup", (ev) => {
    if (KEY_TO_MIDI[ev.key] !== undefined) client.dispatch({ type: "key_up" });
  });
}

window.addEventListener("DOMContentLoaded", main);
