// After-action review screen: two synchronized agent panes, a top-down
// minimap, a scrub bar with event markers, and the explanation chat.
//
// Everything displays one shared playhead.  Frames for both agent panes and
// the minimap are set together in a single render pass, and the chat posts
// whatever time is currently displayed — those two rules are the view's
// core invariants.

import { Marker, ReviewApi, TimelineFile } from "./api.js";
import { Playhead, PLAYBACK_RATES } from "./playhead.js";

function formatT(t: number): number {
  return Number(t.toFixed(2));
}

export class ReviewView {
  playhead!: Playhead;
  markers: Marker[] = [];
  displayT = 0;

  private humanId = "";
  private aiId = "";
  private sessionId: string | null = null;
  private lastFrameT = -1;
  private rafHandle: number | null = null;
  private lastRafMs = 0;

  constructor(
    readonly root: HTMLElement,
    readonly api: ReviewApi,
    readonly missionId: string,
  ) {}

  async init(): Promise<void> {
    const timeline: TimelineFile = await this.api.timeline(this.missionId);
    const roster = timeline.header.roster;
    this.humanId = roster.find((r) => r.kind === "human")?.id ?? roster[0].id;
    this.aiId = roster.find((r) => r.kind === "ai")?.id ?? roster[roster.length - 1].id;
    const end =
      timeline.footer?.outcome.ended_at ??
      (timeline.events.length ? timeline.events[timeline.events.length - 1].timestamp : 0);
    this.playhead = new Playhead(end);
    this.markers = await this.api.markers(this.missionId, [
      "decision_point",
      "phase_change",
      "chat",
    ]);
    this.buildDom(end);
    this.playhead.onChange(() => this.renderFrames());
    this.playhead.seek(0);
  }

  private buildDom(end: number): void {
    this.root.innerHTML = `
      <div class="review">
        <div id="review-banner" hidden></div>
        <div class="panes">
          <figure><img id="pane-human" alt="human view"><figcaption>${this.humanId} (human)</figcaption></figure>
          <figure><img id="pane-ai" alt="ai view"><figcaption>${this.aiId} (ai)</figcaption></figure>
          <figure><img id="pane-top" alt="top-down view"><figcaption>top-down</figcaption></figure>
        </div>
        <div class="scrub">
          <button id="play-toggle" title="play/pause">&#9654;</button>
          <select id="rate"></select>
          <div class="bar">
            <input id="scrubber" type="range" min="0" max="${end}" step="0.05" value="0">
            <div id="marker-bar"></div>
          </div>
          <span id="time-label">t=0 s</span>
        </div>
        <div class="chat">
          <div id="chat-log" role="log"></div>
          <div class="chat-entry">
            <span id="playhead-indicator" title="playhead sent with each query">t=0 s</span>
            <input id="chat-input" placeholder="ask about the mission...">
            <button id="chat-send">Ask</button>
          </div>
        </div>
      </div>`;

    const rate = this.element<HTMLSelectElement>("#rate");
    for (const value of PLAYBACK_RATES) {
      const option = document.createElement("option");
      option.value = String(value);
      option.textContent = `${value}x`;
      if (value === 1) option.selected = true;
      rate.append(option);
    }
    rate.addEventListener("change", () => {
      this.playhead.rate = Number(rate.value);
    });

    const scrubber = this.element<HTMLInputElement>("#scrubber");
    scrubber.addEventListener("input", () => this.playhead.seek(Number(scrubber.value)));

    this.element<HTMLButtonElement>("#play-toggle").addEventListener("click", () =>
      this.togglePlay(),
    );

    const markerBar = this.element<HTMLElement>("#marker-bar");
    for (const marker of this.markers) {
      const tick = document.createElement("button");
      tick.className = `marker marker-${marker.kind}`;
      tick.title = `${marker.label} (t=${formatT(marker.timestamp)} s)`;
      tick.style.left = end > 0 ? `${(marker.timestamp / end) * 100}%` : "0%";
      tick.dataset.timestamp = String(marker.timestamp);
      tick.addEventListener("click", () => this.playhead.seek(marker.timestamp));
      markerBar.append(tick);
    }

    const send = () => void this.sendQuery();
    this.element<HTMLButtonElement>("#chat-send").addEventListener("click", send);
    this.element<HTMLInputElement>("#chat-input").addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter") send();
    });

    for (const id of ["#pane-human", "#pane-ai", "#pane-top"]) {
      this.attachFrameRetry(this.element<HTMLImageElement>(id));
    }
  }

  /** Transient frame failures retry with exponential backoff; persistent
   * ones raise the service banner. */
  private attachFrameRetry(image: HTMLImageElement): void {
    let attempts = 0;
    image.addEventListener("error", () => {
      if (!image.src) return;
      if (attempts >= 3) {
        this.element<HTMLElement>("#review-banner").hidden = false;
        this.element<HTMLElement>("#review-banner").textContent =
          "frame service unreachable — retrying on the next seek";
        attempts = 0;
        return;
      }
      attempts += 1;
      const source = image.src;
      setTimeout(() => {
        image.src = source; // same URL; the playhead owns any t change
      }, 250 * 2 ** attempts);
    });
    image.addEventListener("load", () => {
      attempts = 0;
      this.element<HTMLElement>("#review-banner").hidden = true;
    });
  }

  element<T extends HTMLElement>(selector: string): T {
    const found = this.root.querySelector<T>(selector);
    if (!found) throw new Error(`missing element ${selector}`);
    return found;
  }

  /** One render pass: both agent panes, the minimap, and every time label
   * move to the same displayed t. */
  private renderFrames(): void {
    const t = formatT(this.playhead.t);
    this.displayT = t;
    this.lastFrameT = t;
    this.element<HTMLImageElement>("#pane-human").src = this.api.frameUrl(
      this.missionId, t, this.humanId,
    );
    this.element<HTMLImageElement>("#pane-ai").src = this.api.frameUrl(
      this.missionId, t, this.aiId,
    );
    this.element<HTMLImageElement>("#pane-top").src = this.api.frameUrl(
      this.missionId, t, "topdown",
    );
    this.element<HTMLInputElement>("#scrubber").value = String(this.playhead.t);
    this.element<HTMLElement>("#time-label").textContent = `t=${t} s`;
    this.element<HTMLElement>("#playhead-indicator").textContent = `t=${t} s`;
  }

  togglePlay(): void {
    this.playhead.playing = !this.playhead.playing;
    this.element<HTMLButtonElement>("#play-toggle").innerHTML = this.playhead.playing
      ? "&#10073;&#10073;"
      : "&#9654;";
    if (this.playhead.playing && typeof requestAnimationFrame === "function") {
      this.lastRafMs = performance.now();
      const loop = (now: number) => {
        if (!this.playhead.playing) return;
        this.tick((now - this.lastRafMs) / 1000);
        this.lastRafMs = now;
        this.rafHandle = requestAnimationFrame(loop);
      };
      this.rafHandle = requestAnimationFrame(loop);
    }
  }

  /** Advance playback by wall seconds (the animation loop's body; tests call
   * it directly). */
  tick(wallDtS: number): void {
    this.playhead.advance(wallDtS);
  }

  async sendQuery(): Promise<void> {
    const input = this.element<HTMLInputElement>("#chat-input");
    const text = input.value.trim();
    if (!text) return;
    input.value = "";
    const playheadS = this.displayT; // exactly what the panes display
    this.appendChat("user", `${text}  [t=${playheadS} s]`);
    try {
      if (this.sessionId === null) {
        this.sessionId = await this.api.createSession(this.missionId);
      }
      const answer = await this.api.query(this.sessionId, text, playheadS);
      this.appendChat("assistant", answer);
    } catch (error) {
      this.appendChat("error", String(error));
    }
  }

  private appendChat(role: string, text: string): void {
    const entry = document.createElement("p");
    entry.className = `chat-${role}`;
    entry.textContent = text;
    this.element<HTMLElement>("#chat-log").append(entry);
  }
}
