// DOM glue: one state store, one stream consumer, renders on animation
// frames whenever the store version moves.

import { fetchZones, submitSimConfig } from "./api.js";
import { escapeHtml } from "./format.js";
import { renderMapSvg } from "./map.js";
import { UiState } from "./state.js";
import { EventStreamClient } from "./stream.js";
import { renderBanner, renderFleetLine, renderTollTable } from "./table.js";

const params = new URLSearchParams(location.search);
const gatewayUrl = (params.get("gateway") ?? `${location.protocol}//${location.host}`).replace(/\/$/, "");

const state = new UiState();
const el = (id: string): HTMLElement => {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node;
};

let renderedVersion = -1;
let framePending = false;

function render(): void {
  framePending = false;
  if (state.version === renderedVersion) {
    return;
  }
  renderedVersion = state.version;
  el("banner").innerHTML = renderBanner(state.connection);
  el("fleet").innerHTML = renderFleetLine(state);
  el("map").innerHTML = renderMapSvg(state);
  el("tolls").innerHTML = renderTollTable(state);
}

function schedule(): void {
  if (!framePending) {
    framePending = true;
    requestAnimationFrame(render);
  }
}

function toast(text: string, kind: "ok" | "error"): void {
  const node = el("toast");
  node.innerHTML = `<div class="toast ${kind}">${escapeHtml(text)}</div>`;
  setTimeout(() => {
    node.innerHTML = "";
  }, 4_000);
}

function readForm(): Record<string, unknown> {
  const body: Record<string, unknown> = {};
  const numeric = (id: string): number | undefined => {
    const raw = (el(id) as HTMLInputElement).value.trim();
    return raw === "" ? undefined : Number(raw);
  };
  const vehicles = numeric("f-vehicles");
  if (vehicles !== undefined) {
    body.vehicle_count = vehicles;
  }
  const interval = numeric("f-interval");
  if (interval !== undefined) {
    body.update_interval_ms = interval;
  }
  const noise = numeric("f-noise");
  if (noise !== undefined) {
    body.gps_noise_m = noise;
  }
  const seed = numeric("f-seed");
  if (seed !== undefined) {
    body.seed = seed;
  }
  return body;
}

function showFieldErrors(errors: Record<string, string>): void {
  el("form-errors").innerHTML = Object.entries(errors)
    .map(([field, message]) => `<li data-field="${escapeHtml(field)}">${escapeHtml(message)}</li>`)
    .join("");
}

async function onSubmit(event: Event): Promise<void> {
  event.preventDefault();
  showFieldErrors({});
  const body = readForm();
  state.setPendingForm(body);
  const result = await submitSimConfig(gatewayUrl, body);
  if (result.kind === "ok") {
    const c = result.config;
    (el("f-vehicles") as HTMLInputElement).value = String(c.vehicle_count);
    (el("f-interval") as HTMLInputElement).value = String(c.update_interval_ms);
    (el("f-noise") as HTMLInputElement).value = String(c.gps_noise_m);
    (el("f-seed") as HTMLInputElement).value = c.seed === null ? "" : String(c.seed);
    toast(`applied: ${c.vehicle_count} vehicles @ ${c.update_interval_ms} ms`, "ok");
  } else if (result.kind === "invalid") {
    showFieldErrors(result.errors);
  } else {
    toast(`${result.message} — form kept, try again`, "error");
  }
}

function boot(): void {
  el("sim-form").addEventListener("submit", (e) => {
    void onSubmit(e);
  });
  fetchZones(gatewayUrl)
    .then((zones) => {
      state.setZones(zones);
      schedule();
    })
    .catch(() => {
      /* map simply renders without overlays until the gateway is up */
    });
  const stream = new EventStreamClient(gatewayUrl, {
    onEvent: (event) => {
      state.apply(event);
      schedule();
    },
    onStatus: (connection) => {
      state.setConnection(connection);
      schedule();
    },
  });
  void stream.start();
  schedule();
}

boot();
