/** Test doubles: an EventSource stand-in and a fake gateway that honours the
 * wire contract (composition fallback, idempotent triggers, single ack). */

import type { FetchLike } from "../src/api.js";
import type { EventSourceLike } from "../src/sse.js";
import type { AlertEventMessage, AlertView, EventKind, GpsFixBody } from "../src/types.js";

export class FakeEventSource implements EventSourceLike {
  onopen: ((ev: unknown) => void) | null = null;
  onerror: ((ev: unknown) => void) | null = null;
  closed = false;
  private listeners = new Map<string, ((event: MessageEvent) => void)[]>();

  constructor(readonly url: string) {}

  addEventListener(type: string, listener: (event: MessageEvent) => void): void {
    const existing = this.listeners.get(type) ?? [];
    existing.push(listener);
    this.listeners.set(type, existing);
  }

  close(): void {
    this.closed = true;
  }

  open(): void {
    this.onopen?.({});
  }

  fail(): void {
    this.onerror?.({});
  }

  emitAlert(event: AlertEventMessage): void {
    for (const listener of this.listeners.get("alert") ?? []) {
      listener({ data: JSON.stringify(event) } as MessageEvent);
    }
  }
}

const json = (status: number, body: unknown): Response =>
  new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });

export class FakeGateway {
  alerts = new Map<string, AlertView>();
  events: AlertEventMessage[] = [];
  sources: FakeEventSource[] = [];
  sosCalls: { deviceId: string; triggerId: string; fix?: GpsFixBody }[] = [];
  failNextTrigger = false;

  private seq = 0;
  private counter = 0;
  private triggers = new Map<string, string>();
  private customMessage = "EMERGENCY! I need help.";

  readonly fetch: FetchLike = async (input, init) => this.route(String(input), init);

  eventSourceFactory = (url: string): FakeEventSource => {
    const source = new FakeEventSource(url);
    this.sources.push(source);
    return source;
  };

  /** Push an event to history and every connected stream. */
  private publish(kind: EventKind, alert: AlertView): AlertEventMessage {
    const event: AlertEventMessage = { seq: ++this.seq, kind, at: Date.now(), alert };
    this.events.push(event);
    for (const source of this.sources) {
      if (!source.closed) source.emitAlert(event);
    }
    return event;
  }

  private compose(fix?: GpsFixBody): { message: string; location: AlertView["location"] } {
    if (!fix) {
      return {
        message: `${this.customMessage} Location unavailable`,
        location: { kind: "unavailable" },
      };
    }
    const lon = String(fix.lon);
    const lat = String(fix.lat);
    return {
      message: `${this.customMessage} Longitude:${lon} Latitude:${lat}`,
      location: { kind: "exact", lon, lat, place: null },
    };
  }

  private async route(url: string, init?: RequestInit): Promise<Response> {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    const path = url.replace(/^https?:\/\/[^/]+/, "");

    if (method === "POST" && path === "/devices") {
      return json(201, { device_id: body.device_id });
    }

    const sos = path.match(/^\/devices\/([^/]+)\/sos$/);
    if (method === "POST" && sos) {
      const deviceId = decodeURIComponent(sos[1]);
      this.sosCalls.push({ deviceId, triggerId: body.trigger_id, fix: body.fix });
      if (this.failNextTrigger) {
        this.failNextTrigger = false;
        return json(503, { error: "Unavailable", detail: "scripted outage" });
      }
      const existing = this.triggers.get(`${deviceId}:${body.trigger_id}`);
      if (existing) {
        return json(200, { alert_id: existing, state: this.alerts.get(existing)!.state });
      }
      const alertId = `alert-${++this.counter}`;
      this.triggers.set(`${deviceId}:${body.trigger_id}`, alertId);
      const { message, location } = this.compose(body.fix);
      const created: AlertView = {
        alert_id: alertId,
        device_id: deviceId,
        trigger_id: body.trigger_id,
        state: "triggered",
        created_at: Date.now(),
        location: null,
        message: null,
        deliveries: [],
        acknowledged_by: null,
        state_history: [{ state: "triggered", at: Date.now() }],
        failure_reason: null,
      };
      this.alerts.set(alertId, created);
      this.publish("created", created);
      const delivered: AlertView = {
        ...created,
        state: "delivered",
        location,
        message,
        deliveries: [{ msisdn: "+9••••••0001", final_status: "succeeded", attempts: 1 }],
      };
      this.alerts.set(alertId, delivered);
      this.publish("state_changed", delivered);
      return json(202, { alert_id: alertId, state: "triggered" });
    }

    const ack = path.match(/^\/alerts\/([^/]+)\/ack$/);
    if (method === "POST" && ack) {
      const alert = this.alerts.get(decodeURIComponent(ack[1]));
      if (!alert) return json(404, { error: "UnknownAlert" });
      if (alert.acknowledged_by) {
        return json(409, { error: "AlreadyAcknowledged", detail: "already taken" });
      }
      const acked: AlertView = {
        ...alert,
        acknowledged_by: { responder_id: body.responder_id, at: Date.now() },
      };
      this.alerts.set(alert.alert_id, acked);
      this.publish("acknowledged", acked);
      return json(200, acked);
    }

    const get = path.match(/^\/alerts\/([^/]+)$/);
    if (method === "GET" && get) {
      const alert = this.alerts.get(decodeURIComponent(get[1]));
      return alert ? json(200, alert) : json(404, { error: "UnknownAlert" });
    }

    return json(404, { error: "NotFound", detail: path });
  }
}

export function grantedGeolocation(lat: number, lon: number, accuracy = 12) {
  return {
    getCurrentPosition(
      onSuccess: (position: {
        coords: { latitude: number; longitude: number; accuracy?: number };
        timestamp: number;
      }) => void,
    ): void {
      onSuccess({ coords: { latitude: lat, longitude: lon, accuracy }, timestamp: 1_700_000_000_000 });
    },
  };
}

export const deniedGeolocation = {
  getCurrentPosition(
    _onSuccess: unknown,
    onError: (error: unknown) => void,
  ): void {
    onError({ code: 1, message: "User denied Geolocation" });
  },
};
