// SVG map on a plain coordinate plane: zone overlays plus each vehicle's
// recent routes, colored by the highest pollution level along the route.
// No tile service — the repo stays offline-runnable.

import { escapeHtml } from "./format.js";
import type { UiState } from "./state.js";
import type { LatLon } from "./types.js";

// Index = pollution level; 0 is "outside every zone".
export const LEVEL_COLORS = ["#5d6d7e", "#2e9e5b", "#9ac23c", "#e0b400", "#e07b00", "#cc3321"];

export function levelColor(level: number): string {
  const idx = Math.max(0, Math.min(LEVEL_COLORS.length - 1, Math.trunc(level)));
  return LEVEL_COLORS[idx];
}

interface Bounds {
  minLat: number;
  maxLat: number;
  minLon: number;
  maxLon: number;
}

function collectBounds(state: UiState): Bounds | null {
  let minLat = Infinity;
  let maxLat = -Infinity;
  let minLon = Infinity;
  let maxLon = -Infinity;
  const take = (lat: number, lon: number) => {
    minLat = Math.min(minLat, lat);
    maxLat = Math.max(maxLat, lat);
    minLon = Math.min(minLon, lon);
    maxLon = Math.max(maxLon, lon);
  };
  for (const zone of state.zones) {
    for (const [lon, lat] of zone.ring) {
      take(lat, lon);
    }
  }
  for (const vehicle of state.vehicles.values()) {
    for (const route of vehicle.routes) {
      for (const p of route.points) {
        take(p.lat, p.lon);
      }
    }
  }
  if (minLat > maxLat) {
    return null;
  }
  return { minLat, maxLat, minLon, maxLon };
}

export function renderMapSvg(state: UiState, width = 960, height = 640): string {
  const bounds = collectBounds(state);
  const open = `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" role="img">`;
  if (!bounds) {
    return `${open}<text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="map-empty">waiting for data…</text></svg>`;
  }

  const pad = 0.05;
  const spanLat = Math.max(bounds.maxLat - bounds.minLat, 1e-9);
  const spanLon = Math.max(bounds.maxLon - bounds.minLon, 1e-9);
  const sx = (width * (1 - 2 * pad)) / spanLon;
  const sy = (height * (1 - 2 * pad)) / spanLat;
  const x = (lon: number) => width * pad + (lon - bounds.minLon) * sx;
  const y = (lat: number) => height * (1 - pad) - (lat - bounds.minLat) * sy; // lat grows upward

  const parts: string[] = [open];

  for (const zone of state.zones) {
    const pts = zone.ring.map(([lon, lat]) => `${x(lon).toFixed(1)},${y(lat).toFixed(1)}`).join(" ");
    parts.push(
      `<polygon class="zone" data-zone="${escapeHtml(zone.zone_id)}" points="${pts}" ` +
        `fill="${levelColor(zone.level)}" fill-opacity="0.22" stroke="${levelColor(zone.level)}" stroke-width="1">` +
        `<title>${escapeHtml(zone.zone_id)} (level ${zone.level})</title></polygon>`,
    );
  }

  for (const vehicle of state.vehicles.values()) {
    let last: LatLon | null = null;
    for (const route of vehicle.routes) {
      const pts = route.points.map((p) => `${x(p.lon).toFixed(1)},${y(p.lat).toFixed(1)}`).join(" ");
      parts.push(
        `<polyline class="route" data-vehicle="${escapeHtml(vehicle.id)}" points="${pts}" ` +
          `fill="none" stroke="${levelColor(route.maxLevel)}" stroke-width="2.5" stroke-linecap="round"/>`,
      );
      if (route.points.length > 0) {
        last = route.points[route.points.length - 1];
      }
    }
    if (last) {
      parts.push(
        `<circle class="vehicle" data-vehicle="${escapeHtml(vehicle.id)}" ` +
          `cx="${x(last.lon).toFixed(1)}" cy="${y(last.lat).toFixed(1)}" r="5">` +
          `<title>${escapeHtml(vehicle.id)}</title></circle>`,
      );
    }
  }

  parts.push("</svg>");
  return parts.join("");
}
