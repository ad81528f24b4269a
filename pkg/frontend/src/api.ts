/** Thin JSON client for the session API. Every displayed number comes from
 * these responses; the dashboard never recomputes probabilities. */

export interface SessionSummary {
  id: string;
  phase: "awaiting_proposal" | "awaiting_observation";
  round: number;
  model_names: string[];
  model_probs: number[];
  per_param_variance: number[];
}

export interface Proposal {
  x_star: number[];
  score: number;
  round: number;
}

export interface ObserveResult {
  model_probs: number[];
  per_param_variance: number[];
  round: number;
}

export interface HistoryRow {
  round: number;
  x: number[];
  y: number;
  model_probs: number[];
  per_param_variance: number[];
  score: number;
}

export interface SessionState extends SessionSummary {
  config: unknown;
  input_names: string[];
  history: HistoryRow[];
  proposal: { x_star: number[]; score: number } | null;
  density?: { y: number[]; p: number[] };
}

export class ApiError extends Error {
  status: number;
  field?: string;
  constructor(status: number, message: string, field?: string) {
    super(message);
    this.status = status;
    this.field = field;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(path, init);
  const body = await res.json();
  if (!res.ok) {
    throw new ApiError(res.status, body.error ?? res.statusText, body.field);
  }
  return body as T;
}

export function createSession(config: unknown): Promise<SessionSummary> {
  return request("/sessions", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(config),
  });
}

export function getState(id: string): Promise<SessionState> {
  return request(`/sessions/${id}/state`);
}

export function propose(id: string): Promise<Proposal> {
  return request(`/sessions/${id}/propose`, { method: "POST" });
}

export function observe(id: string, y: number): Promise<ObserveResult> {
  return request(`/sessions/${id}/observe`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ y }),
  });
}
