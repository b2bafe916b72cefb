/** DOM wiring for the two panels. All behavior lives in the imported
 * modules; this file only renders state and forwards clicks. */

import { ApiError, GatewayClient } from "./api.js";
import { FeedStore, coordinateLine } from "./feed.js";
import { PanicController } from "./panic.js";
import { subscribeFeed } from "./sse.js";
import type { AlertView } from "./types.js";

const client = new GatewayClient("");
const store = new FeedStore();
const panic = new PanicController({
  client,
  geolocation: navigator.geolocation ?? null,
});

const el = (id: string): HTMLElement => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
};

const deviceInput = el("device-id") as HTMLInputElement;
const responderInput = el("responder-id") as HTMLInputElement;
const panicButton = el("panic-button") as HTMLButtonElement;
const panicStatus = el("panic-status");
const banner = el("banner");
const feedList = el("feed");
const connection = el("connection");

let bannerTimer: number | undefined;
let ownAlertId: string | null = null;

function showBanner(text: string): void {
  banner.textContent = text;
  banner.classList.add("banner--visible");
  window.clearTimeout(bannerTimer);
  bannerTimer = window.setTimeout(() => banner.classList.remove("banner--visible"), 6000);
}

function stateBadge(alert: AlertView): string {
  return `<span class="badge badge--${alert.state}">${alert.state.replace("_", " ")}</span>`;
}

function renderRow(alert: AlertView): HTMLElement {
  const row = document.createElement("article");
  row.className = "row";
  row.dataset.alertId = alert.alert_id;
  const acked = alert.acknowledged_by;
  const recipients = alert.deliveries
    .map((d) => `<span class="recipient recipient--${d.final_status}">${d.msisdn}</span>`)
    .join(" ");
  row.innerHTML = `
    <header>
      ${stateBadge(alert)}
      <span class="row__device">${alert.device_id}</span>
      <time>${new Date(alert.created_at).toLocaleTimeString()}</time>
    </header>
    <p class="row__coords">${coordinateLine(alert)}</p>
    ${alert.location?.place ? `<p class="row__place">${alert.location.place}</p>` : ""}
    ${alert.message ? `<p class="row__message">${alert.message}</p>` : ""}
    <p class="row__recipients">${recipients}</p>
    <footer>
      ${
        acked
          ? `<span class="badge badge--ack">ACK by ${acked.responder_id}</span>`
          : `<button class="ack-button" type="button">Acknowledge</button>`
      }
    </footer>`;
  const ackButton = row.querySelector<HTMLButtonElement>(".ack-button");
  ackButton?.addEventListener("click", async () => {
    const responderId = responderInput.value.trim();
    if (!responderId) {
      showBanner("Set a responder id before acknowledging.");
      return;
    }
    ackButton.disabled = true;
    try {
      await client.acknowledge(alert.alert_id, responderId);
    } catch (err) {
      ackButton.disabled = false;
      if (err instanceof ApiError && err.code === "AlreadyAcknowledged") {
        showBanner("AlreadyAcknowledged: another responder took this incident.");
      } else {
        showBanner(`Acknowledge failed: ${err instanceof Error ? err.message : err}`);
      }
    }
  });
  return row;
}

function renderFeed(): void {
  const rows = store.rows();
  feedList.replaceChildren(...rows.map(renderRow));
  feedList.classList.toggle("feed--empty", rows.length === 0);
  if (ownAlertId) {
    const own = store.get(ownAlertId);
    if (own) {
      panicStatus.innerHTML = `alert <code>${own.alert_id}</code> ${stateBadge(own)}`;
    }
  }
}

panicButton.addEventListener("click", async () => {
  const deviceId = deviceInput.value.trim();
  if (!deviceId) {
    showBanner("Enter a device id first.");
    return;
  }
  panicButton.disabled = true;
  panicStatus.textContent = "sending…";
  try {
    await client.registerDevice(deviceId);
    const response = await panic.trigger(deviceId);
    ownAlertId = response.alert_id;
    panicStatus.innerHTML = `alert <code>${response.alert_id}</code> created`;
    renderFeed();
  } catch (err) {
    panicStatus.textContent = "failed";
    showBanner(`SOS failed: ${err instanceof Error ? err.message : err}`);
  } finally {
    panicButton.disabled = false;
  }
});

subscribeFeed({
  url: "/events",
  onEvent: (event) => {
    if (store.apply(event)) renderFeed();
  },
  onStatus: (status) => {
    connection.textContent = status;
    connection.className = `connection connection--${status}`;
    if (status === "reconnecting") showBanner("Feed connection lost; reconnecting…");
  },
});

renderFeed();
