/** Feed state: one row per alert, newest first, deduplicated so replayed
 * events (reconnects, the gateway's last-50 backlog) never double-apply. */

import type { AlertEventMessage, AlertView } from "./types.js";

export class FeedStore {
  private readonly alerts = new Map<string, AlertView>();
  private readonly lastSeq = new Map<string, number>();

  /** Apply one stream event; returns false when it was a replay duplicate. */
  apply(event: AlertEventMessage): boolean {
    const id = event.alert.alert_id;
    const seen = this.lastSeq.get(id);
    if (seen !== undefined && event.seq <= seen) {
      return false;
    }
    this.lastSeq.set(id, event.seq);
    this.alerts.set(id, event.alert);
    return true;
  }

  get(alertId: string): AlertView | undefined {
    return this.alerts.get(alertId);
  }

  /** Rows sorted by creation time descending; alert_id breaks ties so the
   * ordering is stable across re-renders. */
  rows(): AlertView[] {
    return [...this.alerts.values()].sort((a, b) => {
      if (b.created_at !== a.created_at) return b.created_at - a.created_at;
      return a.alert_id < b.alert_id ? 1 : a.alert_id > b.alert_id ? -1 : 0;
    });
  }

  get size(): number {
    return this.alerts.size;
  }
}

/** The feed's coordinate line; uses the gateway's formatted strings verbatim. */
export function coordinateLine(alert: AlertView): string {
  const location = alert.location;
  if (!location || location.kind === "unavailable") {
    return "Location unavailable";
  }
  let line = `Longitude:${location.lon} Latitude:${location.lat}`;
  if (location.kind === "approximate") {
    line += " (approx., cell area)";
  }
  return line;
}
