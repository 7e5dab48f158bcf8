// Wire protocol mirror of docs/protocol.md: length-prefixed UTF-8 JSON
// frames carried as WebSocket binary messages.

export const PROTOCOL_VERSION = 1;

export type Cell = [number, number];

export type ActionRequest =
  | { type: "move_to"; target: Cell }
  | { type: "mine"; target: Cell }
  | { type: "craft"; item: string }
  | { type: "chest"; direction: "deposit" | "withdraw"; material: string; n: number }
  | { type: "place"; target: Cell; material: string }
  | { type: "idle" };

export interface InventoryView {
  counts: Record<string, number>;
  tools: string[];
}

export interface AgentView {
  kind: "human" | "ai";
  position: [number, number];
  inventory: InventoryView;
  held_item: string | null;
  looking_at: Cell | null;
  behavior_state: string;
  can_place: boolean;
}

export interface BlockView {
  kind: string;
  material?: string | null;
  remaining?: number | null;
  by?: string | null;
}

export interface BlockChange {
  cell: Cell;
  block: BlockView;
}

export interface WorldView {
  completion: number;
  clock: number;
  phase: number;
  chest: Record<string, number>;
  block_changes: BlockChange[];
}

export interface PlanCellView {
  cell: Cell;
  material: string;
  layer: number;
}

export interface LayoutView {
  width: number;
  height: number;
  tick_rate_hz: number;
  time_limit_s: number;
  reach_radius: number;
  move_speed_cells_s: number;
  crafting_table: Cell;
  chest: Cell;
  pickaxe_wood_cost: number;
  inventory_capacity: number;
  plan: PlanCellView[];
  towers: { material: string; cells: Cell[] }[];
  blocks: BlockChange[];
}

export interface OutcomeView {
  status: "ongoing" | "success" | "failure";
  ended_at?: number | null;
  final_completion?: number | null;
}

export type ClientPayload =
  | { type: "join"; name: string; kind: "human" | "ai"; can_place?: boolean | null }
  | { type: "action"; action: ActionRequest }
  | { type: "chat"; text: string }
  | { type: "disconnect" };

export type ServerPayload =
  | { type: "joined"; agent_id: string; kind: "human" | "ai" }
  | {
      type: "mission_brief";
      mission_id: string;
      config_digest: string;
      layout: LayoutView;
      roster: { id: string; kind: "human" | "ai"; can_place: boolean }[];
    }
  | { type: "state_update"; agents: Record<string, AgentView>; world: WorldView }
  | { type: "chat"; from: string; text: string }
  | { type: "mission_end"; outcome: OutcomeView }
  | { type: "error"; code: string; detail?: string };

export interface Envelope<P = ClientPayload | ServerPayload> {
  v: number;
  seq: number;
  sim_time: number;
  payload: P;
}

const encoder = new TextEncoder();
const decoder = new TextDecoder();

export function encode(envelope: Envelope): ArrayBuffer {
  const body = encoder.encode(JSON.stringify(envelope));
  const frame = new Uint8Array(4 + body.length);
  new DataView(frame.buffer).setUint32(0, body.length, false);
  frame.set(body, 4);
  return frame.buffer;
}

export function decode(data: ArrayBuffer): Envelope {
  const view = new DataView(data);
  if (data.byteLength < 4) throw new Error("malformed-frame: too short");
  const length = view.getUint32(0, false);
  if (data.byteLength - 4 !== length) {
    throw new Error(`malformed-frame: declared ${length}, got ${data.byteLength - 4}`);
  }
  const body = JSON.parse(decoder.decode(new Uint8Array(data, 4)));
  if (body.v !== PROTOCOL_VERSION) {
    throw new Error(`schema-version-mismatch: ${body.v}`);
  }
  return body as Envelope;
}
