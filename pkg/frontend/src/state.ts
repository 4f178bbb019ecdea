/** All UI state transitions go through this pure reducer, so replaying a
 * recorded action log reproduces the exact final state. */
import type {
  ActiveRun,
  AnchorSel,
  DitSteps,
  EditorState,
  Engine,
  JobEvent,
  LoadSel,
  QuantizedGrid,
  RunRecord,
} from "./types.js";
import { MAX_ANCHORS } from "./validation.js";

export type Action =
  | { type: "add-anchor"; anchor: AnchorSel }
  | { type: "remove-anchor"; index: number }
  | { type: "clear-anchors" }
  | { type: "set-load"; load: LoadSel }
  | { type: "set-vf"; vf: number }
  | { type: "set-expert-vf"; enabled: boolean }
  | { type: "set-engine"; engine: Engine }
  | { type: "set-dit-steps"; steps: DitSteps }
  | { type: "set-simp-iters"; iters: number }
  | { type: "dismiss-notice" }
  | { type: "run-started"; jobId: string; problemId: string; engine: Engine }
  | { type: "job-event"; event: JobEvent }
  | { type: "run-recorded"; record: RunRecord }
  | { type: "run-cleared" }
  | { type: "select-compare"; a: number; b: number }
  | { type: "clear-compare" };

export function reduce(state: EditorState, action: Action): EditorState {
  switch (action.type) {
    case "add-anchor": {
      if (state.anchors.length >= MAX_ANCHORS) {
        return { ...state, notice: `at most ${MAX_ANCHORS} anchors` };
      }
      return { ...state, anchors: [...state.anchors, action.anchor], notice: null };
    }
    case "remove-anchor": {
      const anchors = state.anchors.filter((_, i) => i !== action.index);
      return { ...state, anchors, notice: null };
    }
    case "clear-anchors":
      return { ...state, anchors: [], notice: null };
    case "set-load":
      return { ...state, load: action.load, notice: null };
    case "set-vf":
      return { ...state, vf: action.vf };
    case "set-expert-vf":
      return { ...state, expertVf: action.enabled };
    case "set-engine":
      return { ...state, engine: action.engine };
    case "set-dit-steps":
      return { ...state, ditSteps: action.steps };
    case "set-simp-iters":
      return { ...state, simpIters: action.iters };
    case "dismiss-notice":
      return { ...state, notice: null };
    case "run-started":
      return {
        ...state,
        run: {
          jobId: action.jobId,
          problemId: action.problemId,
          engine: action.engine,
          status: "running",
          progress: 0,
          preview: null,
          complianceHistory: [],
          volumeHistory: [],
        },
      };
    case "job-event":
      return state.run ? { ...state, run: applyJobEvent(state.run, action.event) } : state;
    case "run-recorded":
      return {
        ...state,
        history: [...state.history, action.record],
        notice: null,
      };
    case "run-cleared":
      return { ...state, run: null };
    case "select-compare": {
      const n = state.history.length;
      if (action.a >= n || action.b >= n || action.a < 0 || action.b < 0) {
        return { ...state, notice: "compare selection out of range" };
      }
      return { ...state, compareSelection: [action.a, action.b], notice: null };
    }
    case "clear-compare":
      return { ...state, compareSelection: null };
  }
}

function applyJobEvent(run: ActiveRun, event: JobEvent): ActiveRun {
  if (event.event === "progress") {
    const data = event.data;
    const next: ActiveRun = {
      ...run,
      progress: run.progress + 1,
      preview: (data.density as QuantizedGrid | undefined) ?? run.preview,
    };
    if (typeof data.compliance === "number") {
      next.complianceHistory = [...run.complianceHistory, data.compliance];
    }
    if (typeof data.volume === "number") {
      next.volumeHistory = [...run.volumeHistory, data.volume];
    }
    return next;
  }
  if (event.event === "done") {
    return { ...run, status: "done" };
  }
  if (event.event === "cancelled") {
    return { ...run, status: "cancelled" };
  }
  return { ...run, status: "failed", error: String(event.data.error ?? "job failed") };
}

export function replay(initial: EditorState, actions: Action[]): EditorState {
  return actions.reduce(reduce, initial);
}
