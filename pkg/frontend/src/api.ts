// Thin typed client over the gateway API. The fetch implementation is
// injectable so tests can audit every network call.

import type {
  SessionView,
  SlaView,
  SliceSummary,
  TelemetryView,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayError extends Error {
  constructor(public status: number, public body: any) {
    super(`gateway returned ${status}: ${JSON.stringify(body)}`);
  }
}

export class GatewayClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request(method: string, path: string, body?: unknown): Promise<any> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const parsed = await response.json().catch(() => null);
    if (!response.ok) {
      throw new GatewayError(response.status, parsed);
    }
    return parsed;
  }

  postIntent(text: string, speaker: string): Promise<{ session_id: string; state: string }> {
    return this.request("POST", "/intents", { text, speaker });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  submitChoice(sessionId: string,
               body: { index?: number; feedback?: string; idempotency_key?: string },
  ): Promise<{ session_id: string; state: string }> {
    return this.request("POST", `/sessions/${sessionId}/choice`, body);
  }

  listSlices(): Promise<{ slices: SliceSummary[] }> {
    return this.request("GET", "/slices");
  }

  getSlice(nsiId: string): Promise<any> {
    return this.request("GET", `/slices/${nsiId}`);
  }

  terminateSlice(nsiId: string): Promise<any> {
    return this.request("DELETE", `/slices/${nsiId}`);
  }

  augmentSlice(nsiId: string, attribute: string, newValue: number): Promise<any> {
    return this.request("POST", `/slices/${nsiId}/augment`,
                        { attribute, new_value: newValue });
  }

  getSla(nsiId: string, window: string): Promise<SlaView> {
    return this.request("GET", `/slices/${nsiId}/sla?window=${window}`);
  }

  getTelemetry(nsiId: string): Promise<TelemetryView> {
    return this.request("GET", `/slices/${nsiId}/telemetry`);
  }

  getDomains(): Promise<{ domains: any[] }> {
    return this.request("GET", "/domains");
  }
}
