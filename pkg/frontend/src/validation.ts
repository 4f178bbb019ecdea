/** Client-side validation, mirroring the server's codes and check order
 * exactly: a state flagged here is a state the server would 422. */
import {
  ANCHOR_SITES,
  CORNER_SITES,
  MIDPOINT_SITES,
  fixedNodes,
  hasSufficientSupports,
  isLegalSegment,
  nearestBoundaryNode,
} from "./sites.js";
import type { AnchorSel, EditorState, ValidationIssue } from "./types.js";

export const MAX_ANCHORS = 4;
export const VF_RANGE: [number, number] = [0.3, 0.5];

function checkAnchor(anchor: AnchorSel, index: number): ValidationIssue | null {
  if (!ANCHOR_SITES.includes(anchor.site)) {
    return { code: "invalid_anchor", msg: `unknown site ${anchor.site}`, loc: ["anchors", index] };
  }
  if (anchor.kind === "point") {
    if (anchor.end !== undefined) {
      return { code: "invalid_anchor", msg: "point anchors take no end", loc: ["anchors", index] };
    }
    if (!CORNER_SITES.includes(anchor.site) && !MIDPOINT_SITES.includes(anchor.site)) {
      return { code: "invalid_anchor", msg: `bad point site ${anchor.site}`, loc: ["anchors", index] };
    }
    return null;
  }
  if (!anchor.end || !ANCHOR_SITES.includes(anchor.end)) {
    return { code: "invalid_anchor", msg: "segment needs a valid end site", loc: ["anchors", index] };
  }
  if (anchor.site === anchor.end || !isLegalSegment(anchor.site, anchor.end)) {
    return {
      code: "invalid_anchor",
      msg: `segment ${anchor.site}-${anchor.end} does not join two distinct sites on one edge`,
      loc: ["anchors", index],
    };
  }
  return null;
}

export function validateEditorState(state: EditorState): ValidationIssue[] {
  const issues: ValidationIssue[] = [];
  if (state.anchors.length < 1 || state.anchors.length > MAX_ANCHORS) {
    issues.push({
      code: "anchor_count",
      msg: `anchor count must be 1..${MAX_ANCHORS}`,
      loc: ["anchors"],
    });
  }
  state.anchors.slice(0, MAX_ANCHORS).forEach((anchor, i) => {
    const issue = checkAnchor(anchor, i);
    if (issue) issues.push(issue);
  });
  const inRange = state.vf >= VF_RANGE[0] && state.vf <= VF_RANGE[1];
  if (!(state.vf > 0 && state.vf < 1) || (!inRange && !state.expertVf)) {
    issues.push({
      code: "vf_out_of_range",
      msg: `volume fraction ${state.vf} outside [${VF_RANGE[0]}, ${VF_RANGE[1]}]`,
      loc: ["vf"],
    });
  }
  if (state.load === null) {
    issues.push({ code: "missing_load", msg: "place a load on the boundary", loc: ["load"] });
    return issues;
  }
  if (!(state.load.x >= 0 && state.load.x <= 1 && state.load.y >= 0 && state.load.y <= 1)) {
    issues.push({
      code: "load_outside_domain",
      msg: "load coordinates must lie in [0, 1] x [0, 1]",
      loc: ["load"],
    });
  }
  if (issues.length > 0) return issues;
  const node = nearestBoundaryNode(state.nx, state.ny, state.load.x, state.load.y);
  if (fixedNodes(state.nx, state.ny, state.anchors).has(node)) {
    issues.push({
      code: "load_on_support",
      msg: "load node coincides with a fixed node",
      loc: ["load"],
    });
  }
  if (!hasSufficientSupports(state.nx, state.ny, state.anchors)) {
    issues.push({
      code: "insufficient_supports",
      msg: "anchors leave a rigid-body motion unconstrained",
      loc: ["anchors"],
    });
  }
  return issues;
}

/** Request body for POST /api/problems (force-submittable even when
 * invalid, for validation-parity checks against the server). */
export function toProblemRequest(state: EditorState): Record<string, unknown> {
  return {
    nx: state.nx,
    ny: state.ny,
    anchors: state.anchors.map((a) => ({
      kind: a.kind,
      site: a.site,
      ...(a.end !== undefined ? { end: a.end } : {}),
    })),
    load: state.load
      ? { x: state.load.x, y: state.load.y, angle_deg: state.load.angleDeg }
      : { x: 0, y: 0, angle_deg: 0 },
    vf: state.vf,
    allow_any_vf: state.expertVf,
  };
}
