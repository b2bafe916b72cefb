import { describe, expect, it } from "vitest";

import { FeedStore, coordinateLine } from "../src/feed.js";
import type { AlertEventMessage, AlertView } from "../src/types.js";

let seq = 0;

function alert(id: string, overrides: Partial<AlertView> = {}): AlertView {
  return {
    alert_id: id,
    device_id: "d1",
    trigger_id: `t-${id}`,
    state: "triggered",
    created_at: 1000,
    location: null,
    message: null,
    deliveries: [],
    acknowledged_by: null,
    state_history: [{ state: "triggered", at: 1000 }],
    failure_reason: null,
    ...overrides,
  };
}

function event(view: AlertView, kind: AlertEventMessage["kind"] = "state_changed"): AlertEventMessage {
  return { seq: ++seq, kind, at: view.created_at, alert: view };
}

describe("FeedStore", () => {
  it("starts empty", () => {
    expect(new FeedStore().rows()).toEqual([]);
  });

  it("keeps one row per alert, updated by later events", () => {
    const store = new FeedStore();
    store.apply(event(alert("a1"), "created"));
    store.apply(event(alert("a1", { state: "delivered" })));
    expect(store.rows()).toHaveLength(1);
    expect(store.rows()[0].state).toBe("delivered");
  });

  it("ignores replayed events (same seq) after reconnect", () => {
    const store = new FeedStore();
    const first = event(alert("a1"), "created");
    const second = event(alert("a1", { state: "delivered" }));
    expect(store.apply(first)).toBe(true);
    expect(store.apply(second)).toBe(true);
    // replay of the backlog after a reconnect
    expect(store.apply(first)).toBe(false);
    expect(store.apply(second)).toBe(false);
    expect(store.rows()).toHaveLength(1);
    expect(store.rows()[0].state).toBe("delivered");
  });

  it("never lets a stale replay overwrite a newer state", () => {
    const store = new FeedStore();
    const created = event(alert("a1"), "created");
    const delivered = event(alert("a1", { state: "delivered" }));
    store.apply(created);
    store.apply(delivered);
    store.apply({ ...created });
    expect(store.rows()[0].state).toBe("delivered");
  });

  it("orders rows newest-first with a stable tie-break", () => {
    const store = new FeedStore();
    store.apply(event(alert("a-old", { created_at: 1000 }), "created"));
    store.apply(event(alert("a-new", { created_at: 3000 }), "created"));
    store.apply(event(alert("a-mid", { created_at: 2000 }), "created"));
    store.apply(event(alert("a-tie", { created_at: 2000 }), "created"));
    const ids = store.rows().map((r) => r.alert_id);
    expect(ids).toEqual(["a-new", "a-tie", "a-mid", "a-old"]);
    expect(store.rows().map((r) => r.alert_id)).toEqual(ids); // stable re-render
  });
});

describe("coordinateLine", () => {
  it("uses the gateway's strings byte-for-byte", () => {
    const view = alert("a1", {
      location: { kind: "exact", lon: "91.6", lat: "26.1", place: "NH 37" },
    });
    expect(coordinateLine(view)).toBe("Longitude:91.6 Latitude:26.1");
  });

  it("marks cell-area positions", () => {
    const view = alert("a1", {
      location: { kind: "approximate", lon: "91.59", lat: "26.105", radius_m: 1500 },
    });
    expect(coordinateLine(view)).toBe("Longitude:91.59 Latitude:26.105 (approx., cell area)");
  });

  it("renders the fallback for missing locations", () => {
    expect(coordinateLine(alert("a1"))).toBe("Location unavailable");
    expect(coordinateLine(alert("a1", { location: { kind: "unavailable" } }))).toBe(
      "Location unavailable",
    );
  });
});
