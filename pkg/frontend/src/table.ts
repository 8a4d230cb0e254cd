// HTML fragments: toll table (highest fee first), connection banner, and the
// fleet line. Pure string builders so tests assert on them directly.

import { escapeHtml, eurDisplay } from "./format.js";
import type { UiState } from "./state.js";
import type { Connection } from "./types.js";

export function renderTollTable(state: UiState): string {
  const rows = state.tollRows();
  if (rows.length === 0) {
    return `<p class="empty">no tolls yet</p>`;
  }
  const body = rows
    .map(
      (row) =>
        `<tr data-vehicle="${escapeHtml(row.id)}">` +
        `<td class="vehicle">${escapeHtml(row.id)}</td>` +
        `<td class="fee">${eurDisplay(row.cumulativeMicro)} €</td>` +
        `</tr>`,
    )
    .join("");
  return (
    `<table class="tolls"><thead><tr><th>vehicle</th><th>cumulative toll</th></tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}

export function renderBanner(connection: Connection): string {
  if (connection === "live") {
    return "";
  }
  return `<div class="banner stale" role="alert">connection lost — showing last known state, retrying…</div>`;
}

export function renderFleetLine(state: UiState): string {
  const c = state.lastConfig;
  if (!c) {
    return "";
  }
  return (
    `<span class="fleet">fleet: ${c.vehicle_count} vehicles @ ${c.update_interval_ms} ms` +
    `${c.gps_noise_m > 0 ? `, noise ${c.gps_noise_m} m` : ""}</span>`
  );
}
