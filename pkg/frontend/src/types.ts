/** Wire shapes served by the gateway. Numbers arrive pre-masked and
 * coordinates arrive as formatted strings; the console never reformats
 * either. */

export interface DeliveryView {
  msisdn: string;
  final_status: "pending" | "succeeded" | "failed";
  attempts: number;
}

export interface LocationView {
  kind: "exact" | "approximate" | "unavailable";
  lon?: string;
  lat?: string;
  place?: string | null;
  radius_m?: number;
}

export interface StateHistoryEntry {
  state: string;
  at: number;
}

export interface AlertView {
  alert_id: string;
  device_id: string;
  trigger_id: string;
  state: string;
  created_at: number;
  location: LocationView | null;
  message: string | null;
  deliveries: DeliveryView[];
  acknowledged_by: { responder_id: string; at: number } | null;
  state_history: StateHistoryEntry[];
  failure_reason: string | null;
}

export type EventKind = "created" | "state_changed" | "acknowledged";

export interface AlertEventMessage {
  seq: number;
  kind: EventKind;
  at: number;
  alert: AlertView;
}

export interface TriggerResponse {
  alert_id: string;
  state: string;
}

export interface GpsFixBody {
  lat: number;
  lon: number;
  fixed_at: number;
  accuracy_m?: number;
}
