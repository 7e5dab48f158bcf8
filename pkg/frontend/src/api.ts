// REST client for the after-action review service.

export interface Marker {
  timestamp: number;
  label: string;
  kind: string;
}

export interface MissionSummary {
  id: string;
  status: string;
  ended_at: number | null;
  final_completion: number | null;
  events: number;
}

export interface TimelineFile {
  header: {
    mission_id: string;
    roster: { id: string; kind: "human" | "ai"; spawn: [number, number] }[];
  };
  events: { timestamp: number; action: Record<string, unknown> }[];
  footer: { outcome: { status: string; ended_at: number | null } } | null;
}

type Fetcher = (input: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  constructor(
    readonly base: string = "",
    private readonly fetcher: Fetcher = (input, init) => fetch(input, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetcher(this.base + path);
    if (!response.ok) throw new Error(`${path}: HTTP ${response.status}`);
    return (await response.json()) as T;
  }

  listMissions(): Promise<MissionSummary[]> {
    return this.getJson("/missions");
  }

  timeline(missionId: string): Promise<TimelineFile> {
    return this.getJson(`/missions/${missionId}/timeline`);
  }

  markers(missionId: string, kinds?: string[]): Promise<Marker[]> {
    const query = kinds && kinds.length ? `?kinds=${kinds.join(",")}` : "";
    return this.getJson(`/missions/${missionId}/markers${query}`);
  }

  frameUrl(missionId: string, t: number, view: string): string {
    return `${this.base}/missions/${missionId}/frame?t=${t}&view=${encodeURIComponent(view)}`;
  }

  async createSession(missionId: string): Promise<string> {
    const response = await this.fetcher(`${this.base}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ mission_id: missionId }),
    });
    if (!response.ok) throw new Error(`create session: HTTP ${response.status}`);
    return (await response.json()).session_id as string;
  }

  async query(sessionId: string, text: string, playheadS: number): Promise<string> {
    const response = await this.fetcher(`${this.base}/sessions/${sessionId}/query`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text, playhead_s: playheadS }),
    });
    if (!response.ok) throw new Error(`query: HTTP ${response.status}`);
    return (await response.json()).answer as string;
  }
}
