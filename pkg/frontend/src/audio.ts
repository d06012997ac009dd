// Synthesized tone playback for acknowledged machine tokens: one oscillator
// per lane, onsets retrigger it, holds extend it, rests release it.

import { ToneEvent } from "./state.js";

export interface ToneSink {
  start(midi: number): void;
  extend(): void;
  stop(): void;
}

export function applyTones(events: ToneEvent[], sink: ToneSink): void {
  for (const ev of events) {
    if (ev.kind === "onset") sink.start(ev.midi);
    else if (ev.kind === "hold") sink.extend();
    else sink.stop();
  }
}

export function midiToHz(midi: number): number {
  return 440 * Math.pow(2, (midi - 69) / 12);
}

export class OscillatorSink implements ToneSink {
  private ctx: AudioContext;
  private osc: OscillatorNode | null = null;
  private gain: GainNode | null = null;
  private stepSeconds: number;
  private offAt = 0;

  constructor(ctx: AudioContext, tempoBpm: number) {
    this.ctx = ctx;
    this.stepSeconds = 60 / tempoBpm / 4;
  }

  start(midi: number): void {
    this.stop();
    const osc = this.ctx.createOscillator();
    const gain = this.ctx.createGain();
    osc.type = "triangle";
    osc.frequency.value = midiToHz(midi);
    gain.gain.value = 0.18;
    osc.connect(gain);
    gain.connect(this.ctx.destination);
    osc.start();
    this.osc = osc;
    this.gain = gain;
    this.offAt = this.ctx.currentTime + this.stepSeconds;
    osc.stop(this.offAt + 0.75); // safety stop if no hold/explicit off follows
  }

  extend(): void {
    if (this.osc) {
      this.offAt += this.stepSeconds;
      try {
        this.osc.stop(this.offAt + 0.75);
      } catch {
        // already stopped: nothing left to extend
      }
    }
  }

  stop(): void {
    if (this.gain) {
      this.gain.gain.setTargetAtTime(0, this.ctx.currentTime, 0.01);
    }
    if (this.osc) {
      try {
        this.osc.stop(this.ctx.currentTime + 0.05);
      } catch {
        // double stop is fine
      }
    }
    this.osc = null;
    this.gain = null;
  }
}
