/** Thin HTTP client for the planner session service. */

import type {
  CreateSessionResponse,
  PlannerParams,
  SessionDetail,
  StatsResponse,
  TurnResponse,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const message =
        typeof body === "object" && body !== null && "error" in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ServiceError(response.status, message);
    }
    return body as T;
  }

  createSession(
    scenarioId: string,
    params?: Partial<PlannerParams>,
  ): Promise<CreateSessionResponse> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ scenario_id: scenarioId, params }),
    });
  }

  sendMessage(
    sessionId: string,
    text: string,
    nonce: string,
    params?: Partial<PlannerParams>,
  ): Promise<TurnResponse> {
    return this.request(`/sessions/${sessionId}/message`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text, nonce, params }),
    });
  }

  getSession(sessionId: string): Promise<SessionDetail> {
    return this.request(`/sessions/${sessionId}`);
  }

  getStats(sessionId: string): Promise<StatsResponse> {
    return this.request(`/sessions/${sessionId}/stats`);
  }

  health(): Promise<{ status: string }> {
    return this.request("/healthz");
  }
}

let nonceCounter = 0;

/** Unique per planner turn; reused only when retrying the same turn. */
export function freshNonce(): string {
  nonceCounter += 1;
  return `turn-${nonceCounter}-${Math.random().toString(36).slice(2, 10)}`;
}
