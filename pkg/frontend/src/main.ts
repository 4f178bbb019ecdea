/** App wiring: DOM events dispatch reducer actions; the view re-renders
 * from state after every action. */
import { ApiClient, ApiError } from "./api.js";
import { metricDeltas, recomputeVolumeMetrics, volumeFraction, xorDiff, diffCount } from "./compare.js";
import { canvasToDomain, dragToAngleDeg, projectToBoundary } from "./geometry.js";
import { drawCurve, drawDensity, drawDiff, drawEditor, quantizedToGrid } from "./render.js";
import { ANCHOR_SITES } from "./sites.js";
import { reduce, type Action } from "./state.js";
import {
  DIT_STEP_CHOICES,
  initialEditorState,
  type EditorState,
  type ResultMetrics,
  type ServerProblem,
  type Site,
} from "./types.js";
import { toProblemRequest, validateEditorState, VF_RANGE } from "./validation.js";

const api = new ApiClient(
  (window as { TOPOFORGE_API?: string }).TOPOFORGE_API ?? window.location.origin.replace(/:\d+$/, ":7878"),
);

let state: EditorState = initialEditorState();
let serverProblem: ServerProblem | null = null;
let anchorMode: "point" | "segment" = "point";
let pendingSegmentStart: Site | null = null;
let overlayKind: "none" | "stress" | "strain" = "none";
let dragStart: { x: number; y: number } | null = null;

function dispatch(action: Action): void {
  state = reduce(state, action);
  render();
}

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

function buildUi(): void {
  const root = $("app");
  root.innerHTML = `
    <header><h1>topoforge studio</h1><span id="badge" class="badge"></span></header>
    <main>
      <section class="panel">
        <h2>problem</h2>
        <canvas id="editor" width="420" height="420"></canvas>
        <div class="row">
          <label>anchor mode
            <select id="anchor-mode">
              <option value="point">point</option>
              <option value="segment">segment</option>
            </select>
          </label>
          <span id="segment-hint"></span>
          <button id="clear-anchors">clear anchors</button>
        </div>
        <div class="row" id="site-buttons"></div>
        <div class="row">
          <label>volume fraction
            <input id="vf" type="range" min="${VF_RANGE[0]}" max="${VF_RANGE[1]}" step="0.005">
          </label>
          <span id="vf-value"></span>
          <label><input id="expert-vf" type="checkbox"> expert range</label>
        </div>
        <div class="row">
          <label>overlay
            <select id="overlay">
              <option value="none">none</option>
              <option value="stress">stress (log)</option>
              <option value="strain">strain energy (log)</option>
            </select>
          </label>
          <button id="preview">preview fields</button>
        </div>
        <div class="row">
          <label>engine
            <select id="engine">
              <option value="simp">simp</option>
              <option value="dit">dit</option>
            </select>
          </label>
          <label id="steps-label">steps
            <select id="dit-steps">${DIT_STEP_CHOICES.map((s) => `<option>${s}</option>`).join("")}</select>
          </label>
          <label id="iters-label">iterations
            <input id="simp-iters" type="number" min="1" max="500" value="100">
          </label>
          <button id="run" class="primary">run</button>
          <button id="cancel">cancel</button>
        </div>
        <div id="issues"></div>
        <div id="notice"></div>
      </section>
      <section class="panel">
        <h2>run</h2>
        <div class="row"><span id="run-status"></span></div>
        <canvas id="live" width="320" height="320"></canvas>
        <div class="row curves">
          <figure><figcaption>compliance</figcaption>
            <canvas id="curve-compliance" width="220" height="90"></canvas></figure>
          <figure><figcaption>volume</figcaption>
            <canvas id="curve-volume" width="220" height="90"></canvas></figure>
        </div>
        <div id="metrics"></div>
      </section>
      <section class="panel">
        <h2>history</h2>
        <ul id="history"></ul>
        <div class="row">
          <button id="compare">compare selected</button>
          <button id="clear-compare">clear</button>
        </div>
        <div id="compare-panel" hidden>
          <div class="row compare-grids">
            <canvas id="cmp-a" width="180" height="180"></canvas>
            <canvas id="cmp-b" width="180" height="180"></canvas>
            <canvas id="cmp-diff" width="180" height="180"></canvas>
          </div>
          <div id="compare-metrics"></div>
        </div>
      </section>
    </main>`;

  const siteRow = $("site-buttons");
  for (const site of ANCHOR_SITES) {
    const button = document.createElement("button");
    button.textContent = site;
    button.addEventListener("click", () => onSiteClick(site));
    siteRow.appendChild(button);
  }

  $("anchor-mode").addEventListener("change", (e) => {
    anchorMode = (e.target as HTMLSelectElement).value as "point" | "segment";
    pendingSegmentStart = null;
    render();
  });
  $("clear-anchors").addEventListener("click", () => dispatch({ type: "clear-anchors" }));
  const vf = $<HTMLInputElement>("vf");
  vf.addEventListener("input", () => dispatch({ type: "set-vf", vf: Number(vf.value) }));
  $<HTMLInputElement>("expert-vf").addEventListener("change", (e) => {
    const enabled = (e.target as HTMLInputElement).checked;
    vf.min = enabled ? "0.05" : String(VF_RANGE[0]);
    vf.max = enabled ? "0.95" : String(VF_RANGE[1]);
    dispatch({ type: "set-expert-vf", enabled });
  });
  $("overlay").addEventListener("change", (e) => {
    overlayKind = (e.target as HTMLSelectElement).value as typeof overlayKind;
    render();
  });
  $("engine").addEventListener("change", (e) =>
    dispatch({ type: "set-engine", engine: (e.target as HTMLSelectElement).value as "simp" | "dit" }),
  );
  $("dit-steps").addEventListener("change", (e) =>
    dispatch({
      type: "set-dit-steps",
      steps: Number((e.target as HTMLSelectElement).value) as EditorState["ditSteps"],
    }),
  );
  $<HTMLInputElement>("simp-iters").addEventListener("change", (e) =>
    dispatch({ type: "set-simp-iters", iters: Number((e.target as HTMLInputElement).value) }),
  );
  $("preview").addEventListener("click", () => void previewFields());
  $("run").addEventListener("click", () => void runJob());
  $("cancel").addEventListener("click", () => void cancelRun());
  $("compare").addEventListener("click", onCompare);
  $("clear-compare").addEventListener("click", () => dispatch({ type: "clear-compare" }));

  const editor = $<HTMLCanvasElement>("editor");
  editor.addEventListener("pointerdown", (e) => {
    const rect = editor.getBoundingClientRect();
    const p = canvasToDomain(e.clientX - rect.left, e.clientY - rect.top, rect.width, rect.height);
    dragStart = projectToBoundary(p.x, p.y);
  });
  editor.addEventListener("pointerup", (e) => {
    if (!dragStart) return;
    const rect = editor.getBoundingClientRect();
    const p = canvasToDomain(e.clientX - rect.left, e.clientY - rect.top, rect.width, rect.height);
    const angle =
      Math.hypot(p.x - dragStart.x, p.y - dragStart.y) < 0.02
        ? (state.load?.angleDeg ?? 270)
        : dragToAngleDeg(dragStart.x, dragStart.y, p.x, p.y);
    dispatch({ type: "set-load", load: { x: dragStart.x, y: dragStart.y, angleDeg: angle } });
    dragStart = null;
    serverProblem = null;
  });
}

function onSiteClick(site: Site): void {
  if (anchorMode === "point") {
    dispatch({ type: "add-anchor", anchor: { kind: "point", site } });
    return;
  }
  if (pendingSegmentStart === null) {
    pendingSegmentStart = site;
    render();
    return;
  }
  const start = pendingSegmentStart;
  pendingSegmentStart = null;
  dispatch({ type: "add-anchor", anchor: { kind: "segment", site: start, end: site } });
}

async function ensureProblem(): Promise<ServerProblem> {
  if (serverProblem) return serverProblem;
  serverProblem = await api.createProblem(toProblemRequest(state));
  return serverProblem;
}

async function previewFields(): Promise<void> {
  try {
    await ensureProblem();
    if (overlayKind === "none") overlayKind = "stress";
    ($("overlay") as HTMLSelectElement).value = overlayKind;
  } catch (err) {
    showError(err);
  }
  render();
}

async function runJob(): Promise<void> {
  if (validateEditorState(state).length > 0) return;
  try {
    const problem = await ensureProblem();
    const params =
      state.engine === "simp"
        ? { iters: state.simpIters }
        : { steps: state.ditSteps, seed: 0 };
    const { job_id } = await api.startJob({
      problem_id: problem.problem_id,
      engine: state.engine,
      params,
    });
    dispatch({ type: "run-started", jobId: job_id, problemId: problem.problem_id, engine: state.engine });
    await api.streamEvents(job_id, (event) => {
      dispatch({ type: "job-event", event });
      if (event.event === "done") {
        const data = event.data as {
          density: number[][];
          compliance_history?: number[];
          volume_history?: number[];
          metrics: ResultMetrics;
        };
        dispatch({
          type: "run-recorded",
          record: {
            label: `${state.engine} ${new Date().toLocaleTimeString()}`,
            engine: state.engine,
            vf: state.vf,
            density: data.density,
            complianceHistory: data.compliance_history ?? state.run?.complianceHistory ?? [],
            volumeHistory: data.volume_history ?? state.run?.volumeHistory ?? [],
            metrics: data.metrics,
          },
        });
      }
    });
  } catch (err) {
    showError(err);
  }
}

async function cancelRun(): Promise<void> {
  if (!state.run || state.run.status !== "running") return;
  try {
    await api.cancelJob(state.run.jobId);
  } catch (err) {
    showError(err);
  }
}

function onCompare(): void {
  const checked = [...document.querySelectorAll<HTMLInputElement>("#history input:checked")];
  if (checked.length === 2) {
    dispatch({
      type: "select-compare",
      a: Number(checked[0].dataset.index),
      b: Number(checked[1].dataset.index),
    });
  } else {
    state = { ...state, notice: "select exactly two runs" };
    render();
  }
}

function showError(err: unknown): void {
  const msg =
    err instanceof ApiError
      ? err.detail.map((d) => `${d.code}: ${d.msg}`).join("; ") || err.message
      : String(err);
  state = { ...state, notice: msg };
  render();
}

function render(): void {
  const issues = validateEditorState(state);
  const badge = $("badge");
  badge.textContent = issues.length === 0 ? "valid" : "invalid";
  badge.className = `badge ${issues.length === 0 ? "ok" : "bad"}`;
  $("issues").innerHTML = issues
    .map((issue) => `<div class="issue">${issue.code}: ${issue.msg}</div>`)
    .join("");
  $("notice").textContent = state.notice ?? "";
  $("segment-hint").textContent =
    anchorMode === "segment"
      ? pendingSegmentStart
        ? `segment from ${pendingSegmentStart}: pick the end site`
        : "pick the start site"
      : "";
  $("vf-value").textContent = state.vf.toFixed(3);
  ($("vf") as HTMLInputElement).value = String(state.vf);
  $("steps-label").hidden = state.engine !== "dit";
  $("iters-label").hidden = state.engine !== "simp";
  ($("run") as HTMLButtonElement).disabled =
    issues.length > 0 || state.run?.status === "running";

  const overlay =
    overlayKind !== "none" && serverProblem
      ? { kind: overlayKind, grid: serverProblem[overlayKind] }
      : null;
  drawEditor($<HTMLCanvasElement>("editor"), state, overlay, issues.length === 0);

  const run = state.run;
  $("run-status").textContent = run
    ? `${run.engine} job ${run.jobId}: ${run.status} (${run.progress} events)`
    : "no run yet";
  if (run?.preview) drawDensity($<HTMLCanvasElement>("live"), quantizedToGrid(run.preview));
  if (run) {
    drawCurve($<HTMLCanvasElement>("curve-compliance"), run.complianceHistory, "#1565c0", true);
    drawCurve($<HTMLCanvasElement>("curve-volume"), run.volumeHistory, "#2e7d32");
  }
  const last = state.history[state.history.length - 1];
  $("metrics").innerHTML = last
    ? `<table>${Object.entries(last.metrics)
        .map(([k, v]) => `<tr><td>${k}</td><td>${typeof v === "number" ? v.toFixed(4) : v}</td></tr>`)
        .join("")}</table>`
    : "";
  if (last && run?.status === "done") {
    drawDensity($<HTMLCanvasElement>("live"), last.density);
  }

  $("history").innerHTML = state.history
    .map(
      (record, i) =>
        `<li><label><input type="checkbox" data-index="${i}"> ${record.label} ` +
        `(vf ${volumeFraction(record.density).toFixed(3)})</label></li>`,
    )
    .join("");

  const panel = $("compare-panel");
  if (state.compareSelection) {
    panel.hidden = false;
    const [ia, ib] = state.compareSelection;
    const a = state.history[ia];
    const b = state.history[ib];
    drawDensity($<HTMLCanvasElement>("cmp-a"), a.density);
    drawDensity($<HTMLCanvasElement>("cmp-b"), b.density);
    const diff = xorDiff(a.density, b.density);
    drawDiff($<HTMLCanvasElement>("cmp-diff"), diff);
    const deltas = metricDeltas(a.metrics, b.metrics);
    const recompA = recomputeVolumeMetrics(a);
    $("compare-metrics").innerHTML =
      `<p>${diffCount(diff)} differing cells</p>` +
      `<table>${Object.entries(deltas)
        .map(([k, v]) => `<tr><td>d ${k}</td><td>${v === null ? "n/a" : v.toFixed(4)}</td></tr>`)
        .join("")}` +
      `<tr><td>recomputed vf (A)</td><td>${recompA.volume_fraction.toFixed(4)}</td></tr></table>`;
  } else {
    panel.hidden = true;
  }
}

buildUi();
render();
