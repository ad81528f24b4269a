/** Session view model.
 *
 * The view is a pure projection of server responses: rows and chart series
 * copy payload numbers verbatim. Rebuilding the view from GET state yields
 * exactly the same object as applying the incremental responses, which is
 * what keeps page reloads safe.
 */

import type { HistoryRow, ObserveResult, Proposal, SessionState, SessionSummary } from "./api.js";

export interface SessionView {
  id: string;
  phase: "awaiting_proposal" | "awaiting_observation";
  round: number;
  modelNames: string[];
  inputNames: string[];
  history: HistoryRow[];
  /** one series per model; probSeries[m][t] is p(m) after round t+1 */
  probSeries: number[][];
  varSeries: number[][];
  proposal: { x_star: number[]; score: number } | null;
  density: { y: number[]; p: number[] } | null;
}

export function emptyView(summary: SessionSummary, inputNames: string[]): SessionView {
  return {
    id: summary.id,
    phase: summary.phase,
    round: summary.round,
    modelNames: [...summary.model_names],
    inputNames: [...inputNames],
    history: [],
    probSeries: summary.model_names.map(() => []),
    varSeries: summary.model_names.map(() => []),
    proposal: null,
    density: null,
  };
}

export function applyProposal(view: SessionView, proposal: Proposal): SessionView {
  return {
    ...view,
    phase: "awaiting_observation",
    proposal: { x_star: [...proposal.x_star], score: proposal.score },
  };
}

/** Fold in an observe response; x and score come from the pending proposal. */
export function applyObservation(view: SessionView, y: number, result: ObserveResult): SessionView {
  if (view.proposal === null) {
    throw new Error("no pending proposal to attach the observation to");
  }
  const row: HistoryRow = {
    round: result.round,
    x: [...view.proposal.x_star],
    y,
    model_probs: [...result.model_probs],
    per_param_variance: [...result.per_param_variance],
    score: view.proposal.score,
  };
  return {
    ...view,
    phase: "awaiting_proposal",
    round: result.round,
    history: [...view.history, row],
    probSeries: view.probSeries.map((s, m) => [...s, result.model_probs[m]]),
    varSeries: view.varSeries.map((s, m) => [...s, result.per_param_variance[m]]),
    proposal: null,
    density: null,
  };
}

export function setDensity(view: SessionView, density: { y: number[]; p: number[] }): SessionView {
  return { ...view, density: { y: [...density.y], p: [...density.p] } };
}

/** Reconstruct the full view from one GET /sessions/{id}/state payload. */
export function viewFromState(state: SessionState): SessionView {
  return {
    id: state.id,
    phase: state.phase,
    round: state.round,
    modelNames: [...state.model_names],
    inputNames: [...state.input_names],
    history: state.history.map((row) => ({
      round: row.round,
      x: [...row.x],
      y: row.y,
      model_probs: [...row.model_probs],
      per_param_variance: [...row.per_param_variance],
      score: row.score,
    })),
    probSeries: state.model_names.map((_, m) => state.history.map((row) => row.model_probs[m])),
    varSeries: state.model_names.map((_, m) =>
      state.history.map((row) => row.per_param_variance[m])
    ),
    proposal: state.proposal ? { x_star: [...state.proposal.x_star], score: state.proposal.score } : null,
    density: state.density ? { y: [...state.density.y], p: [...state.density.p] } : null,
  };
}

/** Display-tolerance check used before rendering a probability row. */
export function probsSumOk(probs: number[], tol = 1e-6): boolean {
  const s = probs.reduce((a, b) => a + b, 0);
  return Math.abs(s - 1) <= tol && probs.every((p) => p >= -tol);
}
