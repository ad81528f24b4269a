/** Dashboard wiring: session wizard, proposal display, response entry,
 * and the probability / variance / density panels.
 *
 * Every mutation round-trips to the server before anything renders, and a
 * page reload rebuilds the identical view from GET state alone.
 */

import { ApiError, createSession, getState, observe, propose } from "./api.js";
import { renderDensityChart, renderSeriesChart } from "./charts.js";
import { parseResponse, sig4 } from "./format.js";
import {
  SessionView,
  applyObservation,
  applyProposal,
  emptyView,
  probsSumOk,
  setDensity,
  viewFromState,
} from "./state.js";

const FEYNMAN_PRESET = {
  inputs: ["m", "w", "w0", "z"],
  design_box: { lower: [0.1, 0.1, 0.1, 0.1], upper: [2.0, 2.0, 2.0, 2.0] },
  models: [
    {
      name: "omega_sum",
      expression: "c*m^e1*(w^e2 + w0^e3)*z^e4",
      params: ["c", "e1", "e2", "e3", "e4"],
      prior_mean: [0.5, 1.5, 1.5, 1.5, 1.5],
    },
    {
      name: "monomial",
      expression: "c*m^e1*w^e2*w0^e3*z^e4",
      params: ["c", "e1", "e2", "e3", "e4"],
      prior_mean: [0.5, 1.5, 1.5, 1.5, 1.5],
    },
    {
      name: "z_sum",
      expression: "c*m^e1*(w^e2 + z^e4)*w0^e3",
      params: ["c", "e1", "e2", "e3", "e4"],
      prior_mean: [0.5, 1.5, 1.5, 1.5, 1.5],
    },
  ],
  noise: { sigma2: 0.01 },
  barrier: { scale: 64.0, anchor: [0.1, 0.1, 0.1, 0.1] },
  criterion: "js",
  backend: "conv",
  hmc: { n_samples: 1000, n_warmup: 500 },
  optimizer: { n_starts: 6, max_iters: 60, f_tol: 3e-7 },
  seed: 20260809,
};

let view: SessionView | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showWizardError(message: string, field?: string) {
  const box = el("wizard-error");
  box.textContent = field ? `${field}: ${message}` : message;
  box.classList.remove("hidden");
}

async function onCreate() {
  const text = el<HTMLTextAreaElement>("config-input").value;
  let config: unknown;
  try {
    config = JSON.parse(text);
  } catch (err) {
    showWizardError(`config is not valid JSON: ${err}`);
    return;
  }
  el("wizard-error").classList.add("hidden");
  el("create-btn").setAttribute("disabled", "true");
  el("wizard-status").textContent = "sampling priors...";
  try {
    const summary = await createSession(config);
    const state = await getState(summary.id);
    view = viewFromState(state);
    window.location.hash = summary.id;
    render();
  } catch (err) {
    if (err instanceof ApiError) showWizardError(err.message, err.field);
    else showWizardError(String(err));
  } finally {
    el("create-btn").removeAttribute("disabled");
    el("wizard-status").textContent = "";
  }
}

async function onPropose() {
  if (!view) return;
  el("propose-btn").setAttribute("disabled", "true");
  el("session-status").textContent = "optimizing the design criterion...";
  try {
    const proposal = await propose(view.id);
    view = applyProposal(view, proposal);
    const state = await getState(view.id);
    if (state.density) view = setDensity(view, state.density);
    render();
  } catch (err) {
    el("session-status").textContent = err instanceof ApiError ? err.message : String(err);
  } finally {
    el("propose-btn").removeAttribute("disabled");
  }
}

async function onSubmitY() {
  if (!view || !view.proposal) return;
  const box = el<HTMLInputElement>("y-input");
  const y = parseResponse(box.value);
  if (y === null) {
    el("y-error").textContent = "enter a finite number";
    return;
  }
  el("y-error").textContent = "";
  el("submit-btn").setAttribute("disabled", "true");
  el("session-status").textContent = "updating beliefs...";
  try {
    const result = await observe(view.id, y);
    view = applyObservation(view, y, result);
    box.value = "";
    render();
  } catch (err) {
    el("session-status").textContent = err instanceof ApiError ? err.message : String(err);
  } finally {
    el("submit-btn").removeAttribute("disabled");
  }
}

async function reloadFromHash() {
  const id = window.location.hash.slice(1);
  if (!id) return;
  try {
    view = viewFromState(await getState(id));
    render();
  } catch {
    window.location.hash = "";
  }
}

function render() {
  if (!view) return;
  el("wizard").classList.add("hidden");
  el("session").classList.remove("hidden");
  el("session-id").textContent = view.id;
  el("session-round").textContent = String(view.round);
  el("session-phase").textContent =
    view.phase === "awaiting_proposal" ? "ready for the next proposal" : "awaiting your measurement";
  el("session-status").textContent = "";

  const proposalBox = el("proposal-box");
  if (view.proposal) {
    const parts = view.inputNames.map((name, i) => `${name} = ${sig4(view!.proposal!.x_star[i])}`);
    el("proposal-x").textContent = parts.join(",  ");
    el("proposal-score").textContent = `criterion score ${sig4(view.proposal.score)}`;
    proposalBox.classList.remove("hidden");
    el("propose-btn").classList.add("hidden");
  } else {
    proposalBox.classList.add("hidden");
    el("propose-btn").classList.remove("hidden");
  }

  const tbody = el("history-body");
  tbody.replaceChildren(
    ...view.history.map((row) => {
      const tr = document.createElement("tr");
      const cells = [
        String(row.round),
        row.x.map(sig4).join(", "),
        sig4(row.y),
        probsSumOk(row.model_probs) ? row.model_probs.map(sig4).join(", ") : "(invalid)",
        row.per_param_variance.map(sig4).join(", "),
      ];
      cells.forEach((text) => {
        const td = document.createElement("td");
        td.textContent = text;
        tr.appendChild(td);
      });
      return tr;
    })
  );

  renderSeriesChart(el("prob-chart"), view.probSeries, view.modelNames, { yMin: 0, yMax: 1 });
  renderSeriesChart(el("var-chart"), view.varSeries, view.modelNames, { logY: true });
  const densityPanel = el("density-panel");
  if (view.density) {
    densityPanel.classList.remove("hidden");
    renderDensityChart(el("density-chart"), view.density.y, view.density.p);
  } else {
    densityPanel.classList.add("hidden");
  }
}

export function init() {
  el<HTMLTextAreaElement>("config-input").value = JSON.stringify(FEYNMAN_PRESET, null, 2);
  el("preset-btn").addEventListener("click", () => {
    el<HTMLTextAreaElement>("config-input").value = JSON.stringify(FEYNMAN_PRESET, null, 2);
  });
  el("create-btn").addEventListener("click", onCreate);
  el("propose-btn").addEventListener("click", onPropose);
  el("submit-btn").addEventListener("click", onSubmitY);
  window.addEventListener("hashchange", reloadFromHash);
  void reloadFromHash();
}

if (typeof document !== "undefined" && document.getElementById("wizard")) {
  init();
}
