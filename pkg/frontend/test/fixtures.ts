/** Invalid editor states with the validation code both the client and the
 * server must produce. The base state is a valid cantilever. */
import { initialEditorState, type EditorState } from "../src/types.js";

export function validCantilever(): EditorState {
  return {
    ...initialEditorState(),
    anchors: [{ kind: "segment", site: "BL", end: "TL" }],
    load: { x: 1.0, y: 0.5, angleDeg: 270 },
    vf: 0.4,
  };
}

export interface InvalidCase {
  name: string;
  state: EditorState;
  code: string;
}

function make(name: string, code: string, patch: Partial<EditorState>): InvalidCase {
  return { name, code, state: { ...validCantilever(), ...patch } };
}

export const INVALID_STATES: InvalidCase[] = [
  make("no anchors", "anchor_count", { anchors: [] }),
  make("five point anchors", "anchor_count", {
    anchors: (["BL", "BR", "TL", "TR", "MB"] as const).map((site) => ({
      kind: "point" as const,
      site,
    })),
  }),
  make("six anchors mixed", "anchor_count", {
    anchors: [
      { kind: "segment", site: "BL", end: "TL" },
      { kind: "point", site: "BR" },
      { kind: "point", site: "TR" },
      { kind: "point", site: "MB" },
      { kind: "point", site: "MT" },
      { kind: "point", site: "MR" },
    ],
  }),
  make("segment with identical ends", "invalid_anchor", {
    anchors: [{ kind: "segment", site: "BL", end: "BL" }],
  }),
  make("segment across the diagonal", "invalid_anchor", {
    anchors: [{ kind: "segment", site: "BL", end: "TR" }],
  }),
  make("segment between opposite midpoints", "invalid_anchor", {
    anchors: [{ kind: "segment", site: "MB", end: "MT" }],
  }),
  make("segment between adjacent-edge midpoints", "invalid_anchor", {
    anchors: [{ kind: "segment", site: "MB", end: "MR" }],
  }),
  make("point anchor carrying a segment end", "invalid_anchor", {
    anchors: [{ kind: "point", site: "BL", end: "MB" }],
  }),
  make("vf below the sampled range", "vf_out_of_range", { vf: 0.25 }),
  make("vf above the sampled range", "vf_out_of_range", { vf: 0.55 }),
  make("vf zero", "vf_out_of_range", { vf: 0.0 }),
  make("vf above one even in expert mode", "vf_out_of_range", {
    vf: 1.2,
    expertVf: true,
  }),
  make("vf far below range without expert", "vf_out_of_range", { vf: 0.05 }),
  make("load beyond the right edge", "load_outside_domain", {
    load: { x: 1.5, y: 0.5, angleDeg: 270 },
  }),
  make("load below the bottom edge", "load_outside_domain", {
    load: { x: 0.5, y: -0.2, angleDeg: 90 },
  }),
  make("load on the clamped segment", "load_on_support", {
    load: { x: 0.0, y: 1.0, angleDeg: 270 },
  }),
  make("load on a point anchor", "load_on_support", {
    anchors: [
      { kind: "point", site: "BL" },
      { kind: "segment", site: "BR", end: "TR" },
    ],
    load: { x: 0.0, y: 0.0, angleDeg: 0 },
  }),
  make("single point anchor leaves rotation free", "insufficient_supports", {
    anchors: [{ kind: "point", site: "BL" }],
  }),
  make("duplicated point anchor is still one node", "insufficient_supports", {
    anchors: [
      { kind: "point", site: "BL" },
      { kind: "point", site: "BL" },
    ],
  }),
  make("three copies of one midpoint", "insufficient_supports", {
    anchors: [
      { kind: "point", site: "MT" },
      { kind: "point", site: "MT" },
      { kind: "point", site: "MT" },
    ],
  }),
];
