// Gateway HTTP calls. fetch is injectable so tests can script responses.

import { validateSimConfig } from "./config.js";
import type { SimConfig, ZoneRecord } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export type SubmitResult =
  | { kind: "ok"; config: SimConfig }
  | { kind: "invalid"; errors: Record<string, string> }
  | { kind: "unavailable"; message: string };

/**
 * Validate and POST a simulator config. An invalid body never leaves the
 * client; gateway rejections and outages come back as distinct results so
 * the form can highlight fields vs. show a retryable toast.
 */
export async function submitSimConfig(
  gatewayUrl: string,
  body: unknown,
  fetchFn: FetchLike = fetch,
): Promise<SubmitResult> {
  const verdict = validateSimConfig(body);
  if (!verdict.ok) {
    return { kind: "invalid", errors: verdict.errors };
  }
  let response: Response;
  try {
    response = await fetchFn(`${gatewayUrl}/sim/config`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  } catch {
    return { kind: "unavailable", message: "gateway unreachable" };
  }
  const data = (await response.json().catch(() => ({}))) as Record<string, unknown>;
  if (response.ok) {
    return { kind: "ok", config: data.config as SimConfig };
  }
  const message = typeof data.error === "string" ? data.error : `gateway returned ${response.status}`;
  if (response.status === 422 || response.status === 400) {
    return { kind: "invalid", errors: { form: message } };
  }
  return { kind: "unavailable", message };
}

export async function fetchZones(gatewayUrl: string, fetchFn: FetchLike = fetch): Promise<ZoneRecord[]> {
  const response = await fetchFn(`${gatewayUrl}/zones`);
  if (!response.ok) {
    throw new Error(`GET /zones returned ${response.status}`);
  }
  const data = (await response.json()) as { zones: ZoneRecord[] };
  return data.zones;
}
