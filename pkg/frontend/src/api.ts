// Thin typed client for the safety-filter service. Every console action maps
// to exactly one of these calls; the fetch implementation is injectable so
// tests can script the server.

import {
  ProposeResponse,
  SessionInfoResponse,
  SessionResponse,
  TrajectoryResponse,
  ValueSliceResponse,
  WorldResponse,
  GoalDto,
} from "./types";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private base: string,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(`${this.base}${path}`, init);
    } catch (err) {
      throw new ApiError(0, `connection failed: ${err}`);
    }
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body);
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return resp.json() as Promise<T>;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getWorld(): Promise<WorldResponse> {
    return this.request<WorldResponse>("/world");
  }

  getValueSlice(phi: number, gy: number, grid = "value"): Promise<ValueSliceResponse> {
    const params = new URLSearchParams({
      phi: String(phi),
      gy: String(gy),
      grid,
    });
    return this.request<ValueSliceResponse>(`/value-slice?${params}`);
  }

  createSession(state?: { x: number; y: number; phi: number }): Promise<SessionResponse> {
    return this.post<SessionResponse>("/sessions", state ? { state } : {});
  }

  getSession(sessionId: string): Promise<SessionInfoResponse> {
    return this.request<SessionInfoResponse>(`/sessions/${sessionId}`);
  }

  propose(
    sessionId: string,
    goal: GoalDto,
    measure = "euclid",
    intent?: string,
  ): Promise<ProposeResponse> {
    return this.post<ProposeResponse>(`/sessions/${sessionId}/propose`, {
      goal,
      measure,
      intent: intent ?? null,
    });
  }

  accept(sessionId: string, goal: GoalDto): Promise<TrajectoryResponse> {
    return this.post<TrajectoryResponse>(`/sessions/${sessionId}/accept`, { goal });
  }

  reset(
    sessionId: string,
    state: { x: number; y: number; phi: number },
  ): Promise<SessionResponse> {
    return this.post<SessionResponse>(`/sessions/${sessionId}/reset`, { state });
  }
}
