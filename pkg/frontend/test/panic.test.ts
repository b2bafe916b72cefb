import { describe, expect, it } from "vitest";

import { ApiError, GatewayClient } from "../src/api.js";
import { FeedStore } from "../src/feed.js";
import { PanicController } from "../src/panic.js";
import { subscribeFeed } from "../src/sse.js";
import { FakeGateway, deniedGeolocation, grantedGeolocation } from "./helpers.js";

function console_(gateway: FakeGateway, geolocation: unknown) {
  const client = new GatewayClient("", gateway.fetch);
  const store = new FeedStore();
  subscribeFeed({
    url: "/events",
    factory: gateway.eventSourceFactory,
    onEvent: (event) => store.apply(event),
    schedule: () => 0,
  });
  const panic = new PanicController({
    client,
    geolocation: geolocation as never,
    makeTriggerId: (() => {
      let n = 0;
      return () => `t-${++n}`;
    })(),
  });
  return { client, store, panic };
}

describe("panic trigger (criterion: one press, geolocation optional)", () => {
  it("sends the browser position when granted and the row reaches the feed", async () => {
    const gateway = new FakeGateway();
    const { store, panic } = console_(gateway, grantedGeolocation(26.1, 91.6));
    const response = await panic.trigger("browser-device");
    expect(gateway.sosCalls).toHaveLength(1);
    expect(gateway.sosCalls[0].fix).toMatchObject({ lat: 26.1, lon: 91.6 });
    const row = store.get(response.alert_id);
    expect(row).toBeDefined();
    expect(row!.state).toBe("delivered");
    expect(row!.message).toContain("Longitude:91.6");
    expect(row!.message).toContain("Latitude:26.1");
  });

  it("sends no fix when geolocation is denied and the row shows the fallback", async () => {
    const gateway = new FakeGateway();
    const { store, panic } = console_(gateway, deniedGeolocation);
    const response = await panic.trigger("browser-device");
    expect(gateway.sosCalls[0].fix).toBeUndefined();
    const row = store.get(response.alert_id)!;
    expect(row.message).toContain("Location unavailable");
    expect(row.location).toEqual({ kind: "unavailable" });
  });

  it("a double-click produces exactly one alert", async () => {
    const gateway = new FakeGateway();
    const { store, panic } = console_(gateway, grantedGeolocation(26.1, 91.6));
    const [first, second] = await Promise.all([
      panic.trigger("browser-device"),
      panic.trigger("browser-device"),
    ]);
    expect(first.alert_id).toBe(second.alert_id);
    expect(gateway.sosCalls).toHaveLength(1);
    expect(store.size).toBe(1);
  });

  it("is busy while a request is outstanding, free afterwards", async () => {
    const gateway = new FakeGateway();
    const { panic } = console_(gateway, grantedGeolocation(0, 0));
    const pending = panic.trigger("d1");
    expect(panic.busy).toBe(true);
    await pending;
    expect(panic.busy).toBe(false);
  });

  it("reuses the trigger id until the gateway answers, then rotates", async () => {
    const gateway = new FakeGateway();
    const { panic } = console_(gateway, grantedGeolocation(0, 0));
    gateway.failNextTrigger = true;
    await expect(panic.trigger("d1")).rejects.toBeInstanceOf(ApiError);
    await panic.trigger("d1"); // retry after the failure: same id
    await panic.trigger("d1"); // answered: a fresh press gets a new id
    expect(gateway.sosCalls.map((c) => c.triggerId)).toEqual(["t-1", "t-1", "t-2"]);
  });

  it("separate presses after responses create separate alerts", async () => {
    const gateway = new FakeGateway();
    const { store, panic } = console_(gateway, grantedGeolocation(0, 0));
    const a = await panic.trigger("d1");
    const b = await panic.trigger("d1");
    expect(a.alert_id).not.toBe(b.alert_id);
    expect(store.size).toBe(2);
  });
});

describe("acknowledge flow (criterion: ack updates the row, second ack blocked)", () => {
  it("first ack lands on the row, second returns AlreadyAcknowledged", async () => {
    const gateway = new FakeGateway();
    const { client, store, panic } = console_(gateway, grantedGeolocation(26.1, 91.6));
    const { alert_id } = await panic.trigger("d1");

    const acked = await client.acknowledge(alert_id, "resp-1");
    expect(acked.acknowledged_by?.responder_id).toBe("resp-1");
    expect(store.get(alert_id)?.acknowledged_by?.responder_id).toBe("resp-1");

    const err = await client.acknowledge(alert_id, "resp-2").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("AlreadyAcknowledged");
    // the row still names the first responder
    expect(store.get(alert_id)?.acknowledged_by?.responder_id).toBe("resp-1");
  });

  it("acking while the gateway is unreachable surfaces an error, no queueing", async () => {
    const gateway = new FakeGateway();
    const { client, panic } = console_(gateway, grantedGeolocation(0, 0));
    const { alert_id } = await panic.trigger("d1");
    const offline = new GatewayClient("", async () => {
      throw new TypeError("fetch failed");
    });
    const err = await offline.acknowledge(alert_id, "resp-1").catch((e) => e);
    expect(err.code).toBe("GatewayDown");
    // nothing happened server-side
    expect(gateway.alerts.get(alert_id)?.acknowledged_by).toBeNull();
    void client;
  });
});
