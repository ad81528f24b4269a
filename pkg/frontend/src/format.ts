/** Display formatting and input validation for the dashboard. */

/** Format a number to 4 significant figures (proposal coordinates, scores). */
export function sig4(x: number): string {
  if (!Number.isFinite(x)) return String(x);
  if (x === 0) return "0.000";
  return x.toPrecision(4);
}

/**
 * Parse the experimenter's response text. Returns the finite number, or
 * null when the text is not a finite numeric value (blocked client-side;
 * the server would answer 422 anyway).
 */
export function parseResponse(text: string): number | null {
  const trimmed = text.trim();
  if (trimmed === "") return null;
  const value = Number(trimmed);
  return Number.isFinite(value) ? value : null;
}
