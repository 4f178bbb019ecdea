export type Site = "BL" | "BR" | "TL" | "TR" | "MB" | "MT" | "ML" | "MR";

export interface AnchorSel {
  kind: "point" | "segment";
  site: Site;
  end?: Site;
}

export interface LoadSel {
  x: number;        // normalized [0, 1], boundary-snapped
  y: number;
  angleDeg: number; // drag direction, degrees
}

export type Engine = "simp" | "dit";
export const DIT_STEP_CHOICES = [1000, 250, 100, 25, 10, 5] as const;
export type DitSteps = (typeof DIT_STEP_CHOICES)[number];

export interface RunRecord {
  label: string;
  engine: Engine;
  vf: number;
  density: number[][];            // full-resolution result
  complianceHistory: number[];
  volumeHistory: number[];
  metrics: ResultMetrics;
}

export interface ResultMetrics {
  volume_fraction: number;
  vf_error_pct: number;
  floating_material: boolean;
  load_discrepancy: boolean;
  compliance: number | null;
}

export interface ActiveRun {
  jobId: string;
  problemId: string;
  engine: Engine;
  status: "running" | "done" | "failed" | "cancelled";
  progress: number;
  preview: QuantizedGrid | null;
  complianceHistory: number[];
  volumeHistory: number[];
  error?: string;
}

export interface QuantizedGrid {
  nx: number;
  ny: number;
  q: number[];      // row-major, 0..255
}

export interface EditorState {
  nx: number;
  ny: number;
  anchors: AnchorSel[];
  load: LoadSel | null;
  vf: number;
  expertVf: boolean;
  engine: Engine;
  ditSteps: DitSteps;
  simpIters: number;
  notice: string | null;
  run: ActiveRun | null;
  history: RunRecord[];
  compareSelection: [number, number] | null;
}

export interface ValidationIssue {
  code: string;
  msg: string;
  loc: (string | number)[];
}

export interface ServerProblem {
  problem_id: string;
  nx: number;
  ny: number;
  load_node: number;
  load_xy: [number, number];
  stress: number[][];
  strain: number[][];
}

export interface JobEvent {
  event: "progress" | "done" | "failed" | "cancelled";
  data: Record<string, unknown>;
}

export function initialEditorState(): EditorState {
  return {
    nx: 64,
    ny: 64,
    anchors: [],
    load: null,
    vf: 0.4,
    expertVf: false,
    engine: "simp",
    ditSteps: 250,
    simpIters: 100,
    notice: null,
    run: null,
    history: [],
    compareSelection: null,
  };
}
