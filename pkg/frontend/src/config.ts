// Client-side mirror of the gateway's simulator-config validation. The two
// implementations are kept honest by a shared fixture
// (docs/schemas/sim_config_cases.json) that both test suites run against.
// The form never submits a body this validator rejects.

const KNOWN_FIELDS = ["vehicle_count", "update_interval_ms", "gps_noise_m", "seed"] as const;

export interface ValidationResult {
  ok: boolean;
  /** field name -> message; unknown fields appear under their own name */
  errors: Record<string, string>;
}

function isInt(value: unknown): value is number {
  return typeof value === "number" && Number.isInteger(value);
}

export function validateSimConfig(body: unknown): ValidationResult {
  const errors: Record<string, string> = {};
  if (typeof body !== "object" || body === null || Array.isArray(body)) {
    return { ok: false, errors: { form: "config must be a JSON object" } };
  }
  const data = body as Record<string, unknown>;

  for (const key of Object.keys(data)) {
    if (!(KNOWN_FIELDS as readonly string[]).includes(key)) {
      errors[key] = `${key} is not a config field`;
    }
  }
  if ("vehicle_count" in data && (!isInt(data.vehicle_count) || data.vehicle_count < 1)) {
    errors.vehicle_count = "vehicle_count must be an integer >= 1";
  }
  if ("update_interval_ms" in data && (!isInt(data.update_interval_ms) || data.update_interval_ms < 10)) {
    errors.update_interval_ms = "update_interval_ms must be an integer >= 10";
  }
  if ("gps_noise_m" in data) {
    const v = data.gps_noise_m;
    if (typeof v !== "number" || !Number.isFinite(v) || v < 0) {
      errors.gps_noise_m = "gps_noise_m must be a finite number >= 0";
    }
  }
  if ("seed" in data && data.seed !== null && !isInt(data.seed)) {
    errors.seed = "seed must be an integer or null";
  }

  return { ok: Object.keys(errors).length === 0, errors };
}
