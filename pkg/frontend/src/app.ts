// Single-page operator console. Everything renders from wire API answers;
// grids are pinned to the state they were fetched at and refresh explicitly.

import { Client, ConceptInfo, EngineError, SessionInfo } from "./api.js";
import { FormModel, buildForm, missingRequired, setFieldValue, toCreatePayload } from "./forms.js";
import { buildOrgTree, flatten } from "./orgtree.js";
import { WhatIfScenario, exploreWhatIf } from "./whatif.js";

const client = new Client("");
let session: SessionInfo | null = null;
let concepts: ConceptInfo[] = [];

const $ = (id: string) => document.getElementById(id)!;

function show(err: unknown) {
  const banner = $("error-banner");
  if (err instanceof EngineError) {
    banner.textContent = `${err.code}: ${err.message}`;
  } else {
    banner.textContent = String(err);
  }
  banner.classList.remove("hidden");
  setTimeout(() => banner.classList.add("hidden"), 6000);
}

async function guarded(action: () => Promise<void>) {
  try {
    await action();
  } catch (err) {
    show(err);
  }
}

// -- login -------------------------------------------------------------

async function doLogin() {
  const user = ($("login-user") as HTMLInputElement).value.trim();
  if (!user) return;
  const info = await client.openSession(user);
  session = info;
  $("role-banner").textContent =
    `${user} — scenario ${info.scenario}` +
    (info.metadata_admin ? " (metadata admin)" : "") +
    ` — opened at state ${info.state}`;
  $("login-view").classList.add("hidden");
  $("main-view").classList.remove("hidden");
  concepts = (await client.concepts()).concepts;
  fillConceptSelectors();
  await Promise.all([renderOrg(), renderVacancySelector()]);
}

function fillConceptSelectors() {
  for (const id of ["grid-concept", "form-concept"]) {
    const select = $(id) as HTMLSelectElement;
    select.innerHTML = "";
    for (const c of concepts) {
      if (c.builtin) continue;
      const opt = document.createElement("option");
      opt.value = c.name;
      opt.textContent = c.name;
      select.appendChild(opt);
    }
  }
}

// -- org tree with unit scores ------------------------------------------

async function renderOrg() {
  const units = await client.extent("OrgUnit", { page_size: 1000 });
  const scores = await client.appraiseAll();
  const byUnit = new Map(scores.units.map((u) => [u.unit, u.value]));
  const tree = buildOrgTree(units.items);
  const container = $("org-tree");
  container.innerHTML = "";
  for (const { node, depth } of flatten(tree)) {
    const row = document.createElement("div");
    row.className = "org-row";
    row.style.paddingLeft = `${depth * 1.5}rem`;
    const value = byUnit.get(node.id);
    row.textContent =
      `${node.name}  —  F = ${value === undefined ? "n/a" : value.toFixed(3)}`;
    container.appendChild(row);
  }
  $("org-state").textContent = `state ${scores.state}`;
}

// -- data grid (state-pinned) ---------------------------------------------

async function renderGrid(state?: number) {
  const concept = ($("grid-concept") as HTMLSelectElement).value;
  if (!concept) return;
  const page = await client.extent(concept, { state, page_size: 200 });
  const table = $("grid-table") as HTMLTableElement;
  table.innerHTML = "";
  const schema = concepts.find((c) => c.name === concept);
  const cols = schema ? schema.attributes.map((a) => a.name) : [];
  const head = table.createTHead().insertRow();
  for (const col of ["id", ...cols]) {
    const th = document.createElement("th");
    th.textContent = col;
    head.appendChild(th);
  }
  const body = table.createTBody();
  for (const item of page.items) {
    const tr = body.insertRow();
    tr.insertCell().textContent = String(item.id);
    for (const col of cols) {
      tr.insertCell().textContent = item.values[col] === undefined
        ? "" : String(item.values[col]);
    }
  }
  $("grid-state").textContent =
    `pinned at state ${page.state} — ${page.total} objects`;
  ($("grid-state") as HTMLElement).dataset.state = String(page.state);
}

// -- entry form -----------------------------------------------------------

let form: FormModel | null = null;

async function renderForm() {
  const name = ($("form-concept") as HTMLSelectElement).value;
  const schema = concepts.find((c) => c.name === name);
  if (!schema) return;
  form = await buildForm(client, schema);
  drawForm();
}

function drawForm() {
  if (!form) return;
  const host = $("form-fields");
  host.innerHTML = "";
  for (const field of form.fields) {
    const row = document.createElement("label");
    row.className = "form-row";
    const marker = field.required ? " *" : "";
    const caption = document.createElement("span");
    caption.textContent = `${field.name} (${field.type})${marker}`;
    if (field.required) caption.classList.add("required");
    const input = document.createElement("input");
    input.value = form.values[field.name] === undefined
      ? "" : String(form.values[field.name]);
    input.addEventListener("change", () => {
      guarded(async () => {
        const changed = await setFieldValue(client, form!, field.name, input.value);
        if (changed.length) drawForm(); // required markers moved
      });
    });
    row.appendChild(caption);
    row.appendChild(input);
    host.appendChild(row);
  }
  $("form-state").textContent = `required set from state ${form.state}`;
}

async function submitForm() {
  if (!form) return;
  const missing = missingRequired(form);
  if (missing.length) {
    show(new EngineError("VALIDATION", `missing required: ${missing.join(", ")}`));
    return;
  }
  const result = await client.submitEvent("create", toCreatePayload(form));
  $("form-state").textContent = `created at state ${result.state}`;
  form.values = {};
  await renderForm();
}

// -- vacancies ---------------------------------------------------------------

async function renderVacancySelector() {
  const positions = await client.extent("Position", { page_size: 1000 });
  const select = $("vacancy-select") as HTMLSelectElement;
  select.innerHTML = "";
  for (const pos of positions.items) {
    const opt = document.createElement("option");
    opt.value = String(pos.id);
    opt.textContent = `${pos.id}: ${pos.values["title"] ?? "?"}`;
    select.appendChild(opt);
  }
}

async function renderCandidates() {
  const select = $("vacancy-select") as HTMLSelectElement;
  if (!select.value) return;
  const answer = await client.candidates(Number(select.value));
  const host = $("candidate-list");
  host.innerHTML = "";
  for (const c of answer.candidates.slice(0, 25)) {
    const row = document.createElement("div");
    row.className = "candidate-row";
    const current = c.current_position === null
      ? "unassigned" : `currently on ${c.current_position}`;
    row.textContent = `${c.name ?? c.employee} — match ${c.match.toFixed(2)} (${current})`;
    host.appendChild(row);
  }
}

// -- what-if -------------------------------------------------------------------

const moves: Array<[number, number]> = [];

function renderMoves() {
  $("whatif-moves").textContent = moves.length
    ? moves.map(([e, p]) => `${e} → ${p}`).join(", ")
    : "(none)";
}

async function runWhatIf() {
  const ws = Number(($("whatif-ws") as HTMLInputElement).value || "0.5");
  const wl = Number(($("whatif-wl") as HTMLInputElement).value || "0.5");
  const scenario: WhatIfScenario = {
    params: { w_s: ws, w_p: 1 - ws, w_local: wl, w_child: 1 - wl },
    moves,
  };
  const result = await exploreWhatIf(client, scenario);
  const table = $("whatif-table") as HTMLTableElement;
  table.innerHTML = "";
  const head = table.createTHead().insertRow();
  for (const col of ["unit", "F", "baseline", "delta"]) {
    const th = document.createElement("th");
    th.textContent = col;
    head.appendChild(th);
  }
  const body = table.createTBody();
  for (const row of result.rows) {
    const tr = body.insertRow();
    tr.insertCell().textContent = row.name ?? String(row.unit);
    tr.insertCell().textContent = row.value.toFixed(3);
    tr.insertCell().textContent = row.baseline.toFixed(3);
    tr.insertCell().textContent = (row.delta >= 0 ? "+" : "") + row.delta.toFixed(3);
  }
  $("whatif-state").textContent =
    `evaluated at state ${result.state} — log head ${result.headBefore} → ` +
    `${result.headAfter} (read-only)`;
}

// -- wiring ---------------------------------------------------------------------

export function init() {
  $("login-btn").addEventListener("click", () => guarded(doLogin));
  $("grid-refresh").addEventListener("click", () => guarded(() => renderGrid()));
  $("grid-concept").addEventListener("change", () => guarded(() => renderGrid()));
  $("form-concept").addEventListener("change", () => guarded(renderForm));
  $("form-submit").addEventListener("click", () => guarded(submitForm));
  $("vacancy-select").addEventListener("change", () => guarded(renderCandidates));
  $("vacancy-refresh").addEventListener("click", () => guarded(renderCandidates));
  $("org-refresh").addEventListener("click", () => guarded(renderOrg));
  $("whatif-run").addEventListener("click", () => guarded(runWhatIf));
  $("whatif-add-move").addEventListener("click", () => {
    const emp = Number(($("whatif-emp") as HTMLInputElement).value);
    const pos = Number(($("whatif-pos") as HTMLInputElement).value);
    if (Number.isFinite(emp) && Number.isFinite(pos) && emp && pos) {
      moves.push([emp, pos]);
      renderMoves();
    }
  });
  $("whatif-clear").addEventListener("click", () => {
    moves.length = 0;
    renderMoves();
  });
  renderMoves();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  init();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", init);
}
