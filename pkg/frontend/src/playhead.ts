// Review playhead: the single source of truth both panes and the chat share.

export const PLAYBACK_RATES = [0.5, 1, 2, 4] as const;

export class Playhead {
  t = 0;
  playing = false;
  rate = 1;
  private listeners: ((t: number) => void)[] = [];

  constructor(readonly end: number) {}

  onChange(listener: (t: number) => void): void {
    this.listeners.push(listener);
  }

  seek(t: number): void {
    const clamped = Math.min(Math.max(t, 0), this.end);
    this.t = clamped;
    for (const listener of this.listeners) listener(clamped);
  }

  /** Advance by wall-clock seconds while playing; stops at mission end. */
  advance(wallDtS: number): void {
    if (!this.playing) return;
    const next = this.t + wallDtS * this.rate;
    if (next >= this.end) {
      this.playing = false;
      this.seek(this.end);
    } else {
      this.seek(next);
    }
  }
}
