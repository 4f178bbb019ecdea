/** Anchor-site geometry, mirroring the server's node conventions exactly:
 * nodes are indexed iy * (nx + 1) + ix with y pointing up. */
import type { AnchorSel, Site } from "./types.js";

export const CORNER_SITES: Site[] = ["BL", "BR", "TL", "TR"];
export const MIDPOINT_SITES: Site[] = ["MB", "MT", "ML", "MR"];
export const ANCHOR_SITES: Site[] = [...CORNER_SITES, ...MIDPOINT_SITES];

const EDGE_SITES: Site[][] = [
  ["BL", "MB", "BR"],
  ["TL", "MT", "TR"],
  ["BL", "ML", "TL"],
  ["BR", "MR", "TR"],
];

export const SEGMENT_PAIRS: [Site, Site][] = EDGE_SITES.flatMap((sites) => {
  const pairs: [Site, Site][] = [];
  for (let i = 0; i < sites.length; i++) {
    for (let j = i + 1; j < sites.length; j++) pairs.push([sites[i], sites[j]]);
  }
  return pairs;
});

export function isLegalSegment(a: Site, b: Site): boolean {
  return SEGMENT_PAIRS.some(([x, y]) => (x === a && y === b) || (x === b && y === a));
}

export function siteGrid(nx: number, ny: number, site: Site): [number, number] {
  switch (site) {
    case "BL": return [0, 0];
    case "BR": return [nx, 0];
    case "TL": return [0, ny];
    case "TR": return [nx, ny];
    case "MB": return [Math.floor(nx / 2), 0];
    case "MT": return [Math.floor(nx / 2), ny];
    case "ML": return [0, Math.floor(ny / 2)];
    case "MR": return [nx, Math.floor(ny / 2)];
  }
}

export function siteNode(nx: number, ny: number, site: Site): number {
  const [ix, iy] = siteGrid(nx, ny, site);
  return iy * (nx + 1) + ix;
}

export function segmentNodes(nx: number, ny: number, a: Site, b: Site): number[] {
  const [ax, ay] = siteGrid(nx, ny, a);
  const [bx, by] = siteGrid(nx, ny, b);
  const nodes: number[] = [];
  if (ay === by) {
    const [lo, hi] = ax < bx ? [ax, bx] : [bx, ax];
    for (let ix = lo; ix <= hi; ix++) nodes.push(ay * (nx + 1) + ix);
  } else if (ax === bx) {
    const [lo, hi] = ay < by ? [ay, by] : [by, ay];
    for (let iy = lo; iy <= hi; iy++) nodes.push(iy * (nx + 1) + ax);
  } else {
    throw new Error(`segment ${a}-${b} is not along one edge`);
  }
  return nodes;
}

export function anchorNodes(nx: number, ny: number, anchor: AnchorSel): number[] {
  if (anchor.kind === "segment" && anchor.end) {
    return segmentNodes(nx, ny, anchor.site, anchor.end);
  }
  return [siteNode(nx, ny, anchor.site)];
}

export function fixedNodes(nx: number, ny: number, anchors: AnchorSel[]): Set<number> {
  const nodes = new Set<number>();
  for (const anchor of anchors) {
    for (const node of anchorNodes(nx, ny, anchor)) nodes.add(node);
  }
  return nodes;
}

export function boundaryNodes(nx: number, ny: number): number[] {
  const nodes: number[] = [];
  for (let iy = 0; iy <= ny; iy++) {
    for (let ix = 0; ix <= nx; ix++) {
      if (ix === 0 || ix === nx || iy === 0 || iy === ny) {
        nodes.push(iy * (nx + 1) + ix);
      }
    }
  }
  return nodes;
}

/** Nearest boundary node in normalized coordinates; ties resolve to the
 * lowest node index, matching the server. */
export function nearestBoundaryNode(nx: number, ny: number, x: number, y: number): number {
  let best = -1;
  let bestDist = Infinity;
  for (const node of boundaryNodes(nx, ny)) {
    const ix = node % (nx + 1);
    const iy = Math.floor(node / (nx + 1));
    const d = (ix / nx - x) ** 2 + (iy / ny - y) ** 2;
    if (d < bestDist) {
      bestDist = d;
      best = node;
    }
  }
  return best;
}

/** Exact well-posedness test mirroring the server: the anchors must block
 * all three rigid motions. Uses the eigenvalues of the 3x3 Gram matrix of
 * the rigid modes restricted to the fixed DOFs. */
export function hasSufficientSupports(nx: number, ny: number, anchors: AnchorSel[]): boolean {
  const nodes = [...fixedNodes(nx, ny, anchors)];
  if (nodes.length < 2) return false;
  // rows: x-translation, y-translation, rotation; columns: fixed dofs
  const rows: number[][] = [[], [], []];
  for (const node of nodes) {
    const xs = (node % (nx + 1)) / Math.max(nx, 1);
    const ys = Math.floor(node / (nx + 1)) / Math.max(ny, 1);
    rows[0].push(1, 0);
    rows[1].push(0, 1);
    rows[2].push(-ys, xs);
  }
  const gram = [
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
  ];
  for (let i = 0; i < 3; i++) {
    for (let j = i; j < 3; j++) {
      let acc = 0;
      for (let k = 0; k < rows[0].length; k++) acc += rows[i][k] * rows[j][k];
      gram[i][j] = acc;
      gram[j][i] = acc;
    }
  }
  const eig = symmetricEigenvalues3(gram);
  const sMin = Math.sqrt(Math.max(eig[0], 0));
  const sMax = Math.sqrt(Math.max(eig[2], 0));
  return sMin > 1e-8 * Math.max(sMax, 1);
}

/** Eigenvalues of a symmetric 3x3 matrix, ascending (trigonometric form). */
export function symmetricEigenvalues3(m: number[][]): [number, number, number] {
  const p1 = m[0][1] ** 2 + m[0][2] ** 2 + m[1][2] ** 2;
  const q = (m[0][0] + m[1][1] + m[2][2]) / 3;
  if (p1 === 0) {
    const diag = [m[0][0], m[1][1], m[2][2]].sort((a, b) => a - b);
    return [diag[0], diag[1], diag[2]];
  }
  const p2 = (m[0][0] - q) ** 2 + (m[1][1] - q) ** 2 + (m[2][2] - q) ** 2 + 2 * p1;
  const p = Math.sqrt(p2 / 6);
  const b = m.map((row, i) => row.map((v, j) => (v - (i === j ? q : 0)) / p));
  const detB =
    b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
    b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
    b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  const r = Math.min(1, Math.max(-1, detB / 2));
  const phi = Math.acos(r) / 3;
  const eig1 = q + 2 * p * Math.cos(phi);
  const eig3 = q + 2 * p * Math.cos(phi + (2 * Math.PI) / 3);
  const eig2 = 3 * q - eig1 - eig3;
  return [eig3, eig2, eig1];
}
