// Piano-roll model and a minimal DOM painter. The model is a pure function of
// the two lanes so rendered output follows the acknowledged log exactly.

import { labelPitch, isHoldLabel, PITCH_MAX, PITCH_MIN } from "./protocol.js";
import { UiState } from "./state.js";

export interface RollCell {
  lane: 1 | 2;
  step: number;
  midi: number | null; // null = rest/pad
  onset: boolean; // false for hold continuations
}

export interface RollModel {
  steps: number;
  cells: RollCell[];
}

export function rollModel(state: UiState): RollModel {
  const steps = Math.max(state.lane1.length, state.lane2.length);
  const cells: RollCell[] = [];
  for (const lane of [1, 2] as const) {
    const labels = lane === 1 ? state.lane1 : state.lane2;
    let sounding: number | null = null;
    for (let t = 0; t < labels.length; t++) {
      const label = labels[t];
      if (label == null) continue;
      const pitch = labelPitch(label);
      if (pitch !== null && !isHoldLabel(label)) {
        sounding = pitch;
        cells.push({ lane, step: t, midi: pitch, onset: true });
      } else if (isHoldLabel(label)) {
        const held: number | null = pitch ?? sounding;
        if (held !== null) sounding = held;
        cells.push({ lane, step: t, midi: held, onset: false });
      } else {
        sounding = null;
        cells.push({ lane, step: t, midi: null, onset: false });
      }
    }
  }
  return { steps, cells };
}

const ROWS = PITCH_MAX - PITCH_MIN + 1;

export function paintRoll(root: HTMLElement, state: UiState): void {
  const model = rollModel(state);
  root.innerHTML = "";
  root.style.setProperty("--steps", String(Math.max(model.steps, 64)));
  for (const cell of model.cells) {
    if (cell.midi === null) continue;
    const el = document.createElement("div");
    el.className = `note lane${cell.lane}${cell.onset ? " onset" : ""}`;
    el.style.gridColumn = String(cell.step + 1);
    el.style.gridRow = String(ROWS - (cell.midi - PITCH_MIN));
    root.appendChild(el);
  }
  const cursor = document.createElement("div");
  cursor.className = "cursor";
  cursor.style.gridColumn = String(state.step + 1);
  cursor.style.gridRow = `1 / ${ROWS + 1}`;
  root.appendChild(cursor);
}
