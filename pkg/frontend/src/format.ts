// Money formatting. The bus carries fees as 6-decimal euro strings backed by
// integer micro-euros; the dashboard re-derives the integer and renders the
// same 2-decimal display the gateway does (round half up to whole cents), so
// the two can never disagree on a displayed amount.

export function eurMicro(text: string): number {
  const m = /^(\d+)(?:\.(\d{1,6}))?$/.exec(text.trim());
  if (!m) {
    throw new Error(`not a euro amount: ${JSON.stringify(text)}`);
  }
  const whole = Number(m[1]);
  const frac = (m[2] ?? "").padEnd(6, "0");
  return whole * 1_000_000 + Number(frac);
}

export function eurDisplay(micro: number): string {
  const cents = Math.floor((micro + 5_000) / 10_000);
  const whole = Math.floor(cents / 100);
  return `${whole}.${String(cents % 100).padStart(2, "0")}`;
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
