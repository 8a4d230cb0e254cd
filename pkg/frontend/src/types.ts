// Shapes of everything the gateway serves: NDJSON event-stream lines and the
// JSON endpoints the dashboard reads. These mirror the gateway's documented
// payloads; nothing here is invented client-side.

export interface LatLon {
  lat: number;
  lon: number;
}

export interface TraceInfo {
  trace_id: string;
  vehicle_id: string;
  seq: number;
}

export interface RoutePayload {
  vehicle_id: string;
  polyline: LatLon[];
  window: [number, number];
  trace: TraceInfo;
}

export interface LeveledPiece {
  polyline: LatLon[];
  level: number;
  length_m: number;
}

export interface SegmentPayload {
  vehicle_id: string;
  segments: LeveledPiece[];
  trace: TraceInfo;
}

// Money travels as 6-decimal euro strings (integer micro-euros underneath).
export interface TollPayload {
  vehicle_id: string;
  increment_eur: string;
  cumulative_eur: string;
  distance_m_total: number;
  trace: TraceInfo;
}

export interface SimConfig {
  vehicle_count: number;
  update_interval_ms: number;
  gps_noise_m: number;
  seed: number | null;
}

export type StreamEvent =
  | { type: "route"; payload: RoutePayload }
  | { type: "segment"; payload: SegmentPayload }
  | { type: "toll"; payload: TollPayload }
  | { type: "config"; payload: SimConfig };

// GET /zones record; ring vertices are [lon, lat] pairs, ring stored open.
export interface ZoneRecord {
  zone_id: string;
  level: number;
  ring: [number, number][];
}

export type Connection = "live" | "stale";
