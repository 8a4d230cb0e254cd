// The single UI state store. One event-stream consumer mutates it through
// apply(); everything on screen is a pure function of this object, so the
// render loop just watches `version`.

import { eurMicro } from "./format.js";
import type {
  Connection,
  LatLon,
  SimConfig,
  StreamEvent,
  ZoneRecord,
} from "./types.js";

export const ROUTE_HISTORY = 50;
// Segments normally arrive right after their route; this bounds the map of
// levels seen for routes that have not arrived (or never will).
const PENDING_LEVEL_CAP = 1_000;

export interface RouteView {
  traceId: string;
  points: LatLon[];
  maxLevel: number;
}

export interface VehicleView {
  id: string;
  routes: RouteView[];
  cumulativeMicro: number;
  cumulativeEur: string; // verbatim from the latest toll event
  lastSeenMs: number;
}

export interface TollRow {
  id: string;
  cumulativeMicro: number;
  cumulativeEur: string;
  lastSeenMs: number;
}

export class UiState {
  vehicles = new Map<string, VehicleView>();
  zones: ZoneRecord[] = [];
  connection: Connection = "stale";
  lastConfig: SimConfig | null = null;
  pendingForm: Record<string, unknown> = {};
  version = 0;

  private pendingLevels = new Map<string, number>();

  apply(event: StreamEvent, nowMs: number = Date.now()): void {
    switch (event.type) {
      case "route": {
        const p = event.payload;
        const vehicle = this.vehicle(p.vehicle_id);
        const traceId = p.trace.trace_id;
        const maxLevel = this.pendingLevels.get(traceId) ?? 0;
        this.pendingLevels.delete(traceId);
        vehicle.routes.push({ traceId, points: p.polyline, maxLevel });
        if (vehicle.routes.length > ROUTE_HISTORY) {
          vehicle.routes.splice(0, vehicle.routes.length - ROUTE_HISTORY);
        }
        vehicle.lastSeenMs = nowMs;
        break;
      }
      case "segment": {
        const p = event.payload;
        let level = 0;
        for (const piece of p.segments) {
          level = Math.max(level, piece.level);
        }
        const vehicle = this.vehicles.get(p.vehicle_id);
        const route = vehicle?.routes.find((r) => r.traceId === p.trace.trace_id);
        if (route) {
          route.maxLevel = level;
        } else {
          this.pendingLevels.set(p.trace.trace_id, level);
          if (this.pendingLevels.size > PENDING_LEVEL_CAP) {
            const oldest = this.pendingLevels.keys().next().value;
            if (oldest !== undefined) {
              this.pendingLevels.delete(oldest);
            }
          }
        }
        break;
      }
      case "toll": {
        const p = event.payload;
        const vehicle = this.vehicle(p.vehicle_id);
        vehicle.cumulativeEur = p.cumulative_eur;
        vehicle.cumulativeMicro = eurMicro(p.cumulative_eur);
        vehicle.lastSeenMs = nowMs;
        break;
      }
      case "config": {
        this.lastConfig = event.payload;
        break;
      }
    }
    this.version += 1;
  }

  setConnection(connection: Connection): void {
    if (this.connection !== connection) {
      this.connection = connection;
      this.version += 1;
    }
  }

  setZones(zones: ZoneRecord[]): void {
    this.zones = zones;
    this.version += 1;
  }

  setPendingForm(form: Record<string, unknown>): void {
    this.pendingForm = form;
    this.version += 1;
  }

  /** Toll table rows, highest cumulative fee first (ties by vehicle id). */
  tollRows(): TollRow[] {
    const rows: TollRow[] = [];
    for (const v of this.vehicles.values()) {
      rows.push({
        id: v.id,
        cumulativeMicro: v.cumulativeMicro,
        cumulativeEur: v.cumulativeEur,
        lastSeenMs: v.lastSeenMs,
      });
    }
    rows.sort((a, b) => b.cumulativeMicro - a.cumulativeMicro || a.id.localeCompare(b.id));
    return rows;
  }

  private vehicle(id: string): VehicleView {
    let v = this.vehicles.get(id);
    if (!v) {
      v = { id, routes: [], cumulativeMicro: 0, cumulativeEur: "0.000000", lastSeenMs: 0 };
      this.vehicles.set(id, v);
    }
    return v;
  }
}
