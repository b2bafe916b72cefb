/** Thin typed client over the gateway's JSON API. The fetch implementation
 * is injected so tests can run without a browser or a server. */

import type { AlertView, GpsFixBody, TriggerResponse } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail || code);
    this.name = "ApiError";
  }
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let code = `HTTP ${response.status}`;
  let detail = "";
  try {
    const body = (await response.json()) as { error?: string; detail?: string };
    code = body.error ?? code;
    detail = body.detail ?? "";
  } catch {
    // non-JSON error body; keep the status code
  }
  throw new ApiError(response.status, code, detail);
}

export class GatewayClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "GatewayDown", String(err));
    }
    await raiseForStatus(response);
    if (response.status === 204) return undefined as T;
    return (await response.json()) as T;
  }

  registerDevice(deviceId: string): Promise<{ device_id: string }> {
    return this.request("POST", "/devices", { device_id: deviceId });
  }

  trigger(deviceId: string, triggerId: string, fix?: GpsFixBody): Promise<TriggerResponse> {
    const body: Record<string, unknown> = { trigger_id: triggerId };
    if (fix !== undefined) body.fix = fix;
    return this.request("POST", `/devices/${encodeURIComponent(deviceId)}/sos`, body);
  }

  getAlert(alertId: string): Promise<AlertView> {
    return this.request("GET", `/alerts/${encodeURIComponent(alertId)}`);
  }

  acknowledge(alertId: string, responderId: string): Promise<AlertView> {
    return this.request("POST", `/alerts/${encodeURIComponent(alertId)}/ack`, {
      responder_id: responderId,
    });
  }
}
