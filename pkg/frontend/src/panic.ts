/** Panic-button controller: one tap fires the SOS trigger with browser
 * geolocation when granted and nothing when denied (the gateway's fallback
 * path). A second tap while a request is in flight joins the first request,
 * and the client-generated trigger id is reused until the gateway answers,
 * so repeated presses can never create a second alert. */

import type { GatewayClient } from "./api.js";
import type { GpsFixBody, TriggerResponse } from "./types.js";

export interface GeolocationLike {
  getCurrentPosition(
    onSuccess: (position: {
      coords: { latitude: number; longitude: number; accuracy?: number };
      timestamp: number;
    }) => void,
    onError: (error: unknown) => void,
    options?: { timeout?: number; maximumAge?: number; enableHighAccuracy?: boolean },
  ): void;
}

export interface PanicControllerOptions {
  client: GatewayClient;
  geolocation?: GeolocationLike | null;
  geoTimeoutMs?: number;
  makeTriggerId?: () => string;
  now?: () => number;
}

function defaultTriggerId(): string {
  return `panic-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}

export class PanicController {
  private readonly client: GatewayClient;
  private readonly geolocation: GeolocationLike | null;
  private readonly geoTimeoutMs: number;
  private readonly makeTriggerId: () => string;
  private readonly now: () => number;

  private pendingTriggerId: string | null = null;
  private inFlight: Promise<TriggerResponse> | null = null;

  constructor(options: PanicControllerOptions) {
    this.client = options.client;
    this.geolocation = options.geolocation ?? null;
    this.geoTimeoutMs = options.geoTimeoutMs ?? 5000;
    this.makeTriggerId = options.makeTriggerId ?? defaultTriggerId;
    this.now = options.now ?? Date.now;
  }

  /** True while a trigger request is outstanding (drives button disabling). */
  get busy(): boolean {
    return this.inFlight !== null;
  }

  private locate(): Promise<GpsFixBody | undefined> {
    if (!this.geolocation) {
      return Promise.resolve(undefined);
    }
    return new Promise((resolve) => {
      this.geolocation!.getCurrentPosition(
        (position) =>
          resolve({
            lat: position.coords.latitude,
            lon: position.coords.longitude,
            fixed_at: position.timestamp || this.now(),
            accuracy_m: position.coords.accuracy,
          }),
        () => resolve(undefined), // denied or unavailable: fall back to no fix
        { timeout: this.geoTimeoutMs, maximumAge: 60_000 },
      );
    });
  }

  trigger(deviceId: string): Promise<TriggerResponse> {
    if (this.inFlight) {
      return this.inFlight;
    }
    if (this.pendingTriggerId === null) {
      this.pendingTriggerId = this.makeTriggerId();
    }
    const triggerId = this.pendingTriggerId;
    this.inFlight = (async () => {
      try {
        const fix = await this.locate();
        const response = await this.client.trigger(deviceId, triggerId, fix);
        this.pendingTriggerId = null; // answered; next press is a new alert
        return response;
      } finally {
        this.inFlight = null;
      }
    })();
    return this.inFlight;
  }
}
