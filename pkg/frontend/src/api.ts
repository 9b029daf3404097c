// Typed client for the tracking service. The UI never computes geometry:
// every polyline it draws comes from these endpoints.

export interface TrajectoryDto {
  id: number;
  points: [number, number][];
}

export interface SessionSummary {
  session_id: string;
  width: number;
  height: number;
  n_trajectories: number;
  trajectories: TrajectoryDto[];
  has_gt: boolean;
  config: Record<string, unknown>;
}

export interface PathPiece {
  kind: "trajectory" | "bridge";
  span: [number, number];
}

export interface TrackedPathDto {
  nodes: number[];
  polyline: [number, number][];
  pieces: PathPiece[];
}

export interface TrackReport {
  metric: string;
  path: TrackedPathDto;
  nodes: number[];
  edge_weights: { edge: [number, number]; weight: number | null }[];
  seconds: { attach: number; dijkstra: number; total: number };
  j_score?: number;
}

export interface TrajectoryOverlay {
  trajectories: TrajectoryDto[];
  zeta_png: string;
}

export class ApiError extends Error {
  status: number;
  detail: string;
  componentSize?: number;
  nearestTrajectories: number[] = [];

  constructor(status: number, body: Record<string, unknown>) {
    super(`${body.error ?? "Error"}: ${body.detail ?? status}`);
    this.status = status;
    this.detail = String(body.detail ?? "");
    if (typeof body.component_size === "number") {
      this.componentSize = body.component_size;
    }
    if (Array.isArray(body.nearest_trajectories)) {
      this.nearestTrajectories = body.nearest_trajectories as number[];
    }
  }
}

async function parse<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let body: Record<string, unknown> = {};
    try {
      body = await resp.json();
    } catch {
      body = { error: "HttpError", detail: resp.statusText };
    }
    throw new ApiError(resp.status, body);
  }
  return (await resp.json()) as T;
}

export class TubetrackClient {
  constructor(private baseUrl: string = "") {}

  async createDemoSession(
    kind: string,
    config: Record<string, unknown> = {},
    options: { rngSeed?: number; sigmaN?: number } = {},
  ): Promise<SessionSummary> {
    const resp = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        demo: kind,
        config,
        rng_seed: options.rngSeed ?? 8,
        sigma_n: options.sigmaN ?? 0.15,
      }),
    });
    return parse<SessionSummary>(resp);
  }

  async getTrajectories(sessionId: string): Promise<TrajectoryOverlay> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/trajectories`);
    return parse<TrajectoryOverlay>(resp);
  }

  imageUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/image`;
  }

  async track(
    sessionId: string,
    points: [number, number][],
    metric: string,
    signal?: AbortSignal,
  ): Promise<TrackReport> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/track`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ points, metric }),
      signal,
    });
    return parse<TrackReport>(resp);
  }
}
