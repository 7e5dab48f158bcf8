// Live play screen: join the game server as the human, render broadcasts on
// a canvas, turn keys and clicks into action requests, relay chat.

import {
  ActionRequest,
  AgentView,
  BlockView,
  Cell,
  ClientPayload,
  decode,
  encode,
  LayoutView,
  ServerPayload,
} from "./protocol.js";

export interface SocketLike {
  binaryType: string;
  send(data: ArrayBuffer): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: ArrayBuffer }) => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const CELL_PX = 28;

const MATERIAL_COLORS: Record<string, string> = {
  wood: "#8b5a2b",
  stone: "#7f8c8d",
  brick: "#b23939",
};

const KEY_OFFSETS: Record<string, Cell> = {
  ArrowUp: [0, -1],
  ArrowDown: [0, 1],
  ArrowLeft: [-1, 0],
  ArrowRight: [1, 0],
};

function cellKey(cell: Cell): string {
  return `${cell[0]},${cell[1]}`;
}

export class PlayView {
  layout: LayoutView | null = null;
  agents: Record<string, AgentView> = {};
  blocks = new Map<string, BlockView>();
  clock = 0;
  completion = 0;
  phase = 1;
  chest: Record<string, number> = {};
  ended = false;

  private socket: SocketLike;
  private seq = 0;

  constructor(
    readonly root: HTMLElement,
    readonly name: string,
    serverUrl: string,
    socketFactory: SocketFactory = (url) => new WebSocket(url) as unknown as SocketLike,
  ) {
    this.buildDom();
    this.socket = socketFactory(serverUrl);
    this.socket.binaryType = "arraybuffer";
    this.socket.onopen = () => this.send({ type: "join", name: this.name, kind: "human" });
    this.socket.onmessage = (event) => this.onFrame(event.data);
    this.socket.onclose = () => {
      if (!this.ended) this.banner("connection closed");
    };
  }

  private buildDom(): void {
    this.root.innerHTML = `
      <div class="play">
        <div id="hud">joining as <b>${this.name}</b>…</div>
        <canvas id="world" width="640" height="480" tabindex="0"></canvas>
        <div id="banner" hidden></div>
        <div class="chat">
          <div id="chat-log" role="log"></div>
          <input id="chat-input" placeholder="chat / command the helper… (Enter)">
        </div>
        <p class="help">arrows move &middot; click a tower to mine, a marked cell to
        place, the chest to deposit (shift-click withdraws) &middot; c crafts a pickaxe</p>
      </div>`;
    const canvas = this.canvas();
    canvas.addEventListener("keydown", (event) => this.onKey(event as KeyboardEvent));
    canvas.addEventListener("mousedown", (event) => this.onClick(event as MouseEvent));
    const input = this.root.querySelector<HTMLInputElement>("#chat-input")!;
    input.addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter" && input.value.trim()) {
        this.send({ type: "chat", text: input.value.trim() });
        input.value = "";
      }
    });
  }

  canvas(): HTMLCanvasElement {
    return this.root.querySelector<HTMLCanvasElement>("#world")!;
  }

  send(payload: ClientPayload): void {
    this.seq += 1;
    this.socket.send(encode({ v: 1, seq: this.seq, sim_time: this.clock, payload }));
  }

  sendAction(action: ActionRequest): void {
    this.send({ type: "action", action });
  }

  private onFrame(data: ArrayBuffer): void {
    const payload = decode(data).payload as ServerPayload;
    switch (payload.type) {
      case "joined":
        this.appendChat("system", `${payload.agent_id} joined (${payload.kind})`);
        break;
      case "mission_brief": {
        this.layout = payload.layout;
        for (const change of payload.layout.blocks) {
          this.blocks.set(cellKey(change.cell), change.block);
        }
        const canvas = this.canvas();
        canvas.width = payload.layout.width * CELL_PX;
        canvas.height = payload.layout.height * CELL_PX;
        this.draw();
        break;
      }
      case "state_update": {
        this.agents = payload.agents;
        this.clock = payload.world.clock;
        this.completion = payload.world.completion;
        this.phase = payload.world.phase;
        this.chest = payload.world.chest;
        for (const change of payload.world.block_changes) {
          this.blocks.set(cellKey(change.cell), change.block);
        }
        this.hud();
        this.draw();
        break;
      }
      case "chat":
        this.appendChat(payload.from, payload.text);
        break;
      case "error":
        if (payload.code === "join-rejected") {
          this.banner(`join rejected: ${payload.detail ?? ""}`);
        }
        this.appendChat("server", `${payload.code}${payload.detail ? ": " + payload.detail : ""}`);
        break;
      case "mission_end": {
        this.ended = true;
        const outcome = payload.outcome;
        this.banner(
          `mission ${outcome.status} — completion ` +
            `${Math.round((outcome.final_completion ?? 0) * 100)}% at t=${outcome.ended_at} s`,
        );
        break;
      }
    }
  }

  myCell(): Cell | null {
    const me = this.agents[this.name];
    if (!me) return null;
    return [Math.floor(me.position[0]), Math.floor(me.position[1])];
  }

  private onKey(event: KeyboardEvent): void {
    if (this.ended) return;
    const offset = KEY_OFFSETS[event.key];
    if (offset) {
      const cell = this.myCell();
      if (!cell || !this.layout) return;
      const target: Cell = [
        Math.min(Math.max(cell[0] + offset[0], 0), this.layout.width - 1),
        Math.min(Math.max(cell[1] + offset[1], 0), this.layout.height - 1),
      ];
      this.sendAction({ type: "move_to", target });
      event.preventDefault();
    } else if (event.key === "c") {
      this.sendAction({ type: "craft", item: "pickaxe" });
    }
  }

  private onClick(event: MouseEvent): void {
    if (this.ended || !this.layout) return;
    const rect = this.canvas().getBoundingClientRect();
    const cell: Cell = [
      Math.floor((event.clientX - rect.left) / CELL_PX),
      Math.floor((event.clientY - rect.top) / CELL_PX),
    ];
    this.sendAction(this.actionForCell(cell, event.shiftKey));
  }

  /** Context action for a clicked cell: mine towers, place on markers,
   * exchange with the chest, walk anywhere else. */
  actionForCell(cell: Cell, shift = false): ActionRequest {
    const block = this.blocks.get(cellKey(cell));
    const layout = this.layout!;
    if (block?.kind === "tower_block") {
      return { type: "mine", target: cell };
    }
    if (cellKey(cell) === cellKey(layout.chest)) {
      const me = this.agents[this.name];
      if (shift) {
        const material = Object.keys(this.chest).sort()[0];
        if (material) return { type: "chest", direction: "withdraw", material, n: 1 };
      } else if (me) {
        const counts = me.inventory.counts;
        const material = Object.keys(counts).sort((a, b) => counts[b] - counts[a])[0];
        if (material) {
          return { type: "chest", direction: "deposit", material, n: counts[material] };
        }
      }
      return { type: "move_to", target: [layout.chest[0], layout.chest[1] + 1] };
    }
    const plan = layout.plan.find((p) => cellKey(p.cell) === cellKey(cell));
    if (plan && block?.kind !== "placed") {
      return { type: "place", target: cell, material: plan.material };
    }
    return { type: "move_to", target: cell };
  }

  private hud(): void {
    const hud = this.root.querySelector<HTMLElement>("#hud")!;
    const me = this.agents[this.name];
    const carried = me
      ? Object.entries(me.inventory.counts).map(([m, n]) => `${m}:${n}`).join(" ") || "nothing"
      : "…";
    const tools = me && me.inventory.tools.length ? ` + ${me.inventory.tools.join(",")}` : "";
    hud.textContent =
      `t=${this.clock.toFixed(1)}s · built ${(this.completion * 100).toFixed(0)}% · ` +
      `phase ${this.phase} · carrying ${carried}${tools} · chest ` +
      (Object.entries(this.chest).map(([m, n]) => `${m}:${n}`).join(" ") || "empty");
  }

  banner(text: string): void {
    const banner = this.root.querySelector<HTMLElement>("#banner")!;
    banner.hidden = false;
    banner.textContent = text;
  }

  private appendChat(from: string, text: string): void {
    const log = this.root.querySelector<HTMLElement>("#chat-log")!;
    const entry = document.createElement("p");
    entry.textContent = `${from}: ${text}`;
    log.append(entry);
    log.scrollTop = log.scrollHeight;
  }

  draw(): void {
    const context = this.canvas().getContext("2d");
    if (!context || !this.layout) return; // headless test environments
    const { width, height } = this.layout;
    context.fillStyle = "#d6cfc0";
    context.fillRect(0, 0, width * CELL_PX, height * CELL_PX);
    context.strokeStyle = "#c4bdae";
    for (let x = 0; x <= width; x += 1) {
      context.beginPath();
      context.moveTo(x * CELL_PX, 0);
      context.lineTo(x * CELL_PX, height * CELL_PX);
      context.stroke();
    }
    for (let y = 0; y <= height; y += 1) {
      context.beginPath();
      context.moveTo(0, y * CELL_PX);
      context.lineTo(width * CELL_PX, y * CELL_PX);
      context.stroke();
    }
    for (const [key, block] of this.blocks) {
      const [x, y] = key.split(",").map(Number);
      context.fillStyle = this.blockColor(block);
      context.fillRect(x * CELL_PX + 1, y * CELL_PX + 1, CELL_PX - 2, CELL_PX - 2);
      if (block.kind === "tower_block" && block.remaining != null) {
        context.fillStyle = "#f0f0f0";
        context.fillText(String(block.remaining), x * CELL_PX + 4, (y + 1) * CELL_PX - 4);
      }
    }
    for (const [agentId, agent] of Object.entries(this.agents)) {
      context.fillStyle = agent.kind === "human" ? "#1f6feb" : "#d93f3f";
      context.beginPath();
      context.arc(
        agent.position[0] * CELL_PX,
        agent.position[1] * CELL_PX,
        CELL_PX * 0.35, 0, Math.PI * 2,
      );
      context.fill();
      context.fillStyle = "#111";
      context.fillText(agentId, agent.position[0] * CELL_PX - 10, agent.position[1] * CELL_PX - 12);
    }
  }

  private blockColor(block: BlockView): string {
    switch (block.kind) {
      case "air":
        return "#e9e4d8";
      case "crafting_table":
        return "#6b4f1d";
      case "chest":
        return "#c9a227";
      case "marker":
        return "#cdbfa6";
      case "tower_block":
      case "placed":
        return MATERIAL_COLORS[block.material ?? ""] ?? "#568259";
      default:
        return "#d6cfc0";
    }
  }
}
