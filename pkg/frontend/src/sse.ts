/** Live feed subscription over server-sent events with automatic
 * reconnection. The EventSource constructor and timer are injected so the
 * reconnect policy is testable without a browser. */

import type { AlertEventMessage } from "./types.js";

export interface EventSourceLike {
  addEventListener(type: string, listener: (event: MessageEvent) => void): void;
  onopen: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export type FeedStatus = "connecting" | "open" | "reconnecting";

export interface FeedSubscriptionOptions {
  url: string;
  onEvent: (event: AlertEventMessage) => void;
  onStatus?: (status: FeedStatus) => void;
  factory?: EventSourceFactory;
  schedule?: (fn: () => void, ms: number) => unknown;
  baseBackoffMs?: number;
  maxBackoffMs?: number;
}

export interface FeedSubscription {
  close(): void;
}

export function subscribeFeed(options: FeedSubscriptionOptions): FeedSubscription {
  const factory: EventSourceFactory =
    options.factory ?? ((url) => new EventSource(url) as unknown as EventSourceLike);
  const schedule = options.schedule ?? ((fn: () => void, ms: number) => setTimeout(fn, ms));
  const base = options.baseBackoffMs ?? 1000;
  const max = options.maxBackoffMs ?? 30_000;

  let backoff = base;
  let source: EventSourceLike | null = null;
  let closed = false;

  const connect = () => {
    if (closed) return;
    options.onStatus?.("connecting");
    source = factory(options.url);
    source.addEventListener("alert", (event) => {
      options.onEvent(JSON.parse(event.data as string) as AlertEventMessage);
    });
    source.onopen = () => {
      backoff = base;
      options.onStatus?.("open");
    };
    source.onerror = () => {
      if (closed) return;
      source?.close();
      source = null;
      options.onStatus?.("reconnecting");
      const delay = backoff;
      backoff = Math.min(backoff * 2, max);
      schedule(connect, delay);
    };
  };

  connect();
  return {
    close() {
      closed = true;
      source?.close();
      source = null;
    },
  };
}
