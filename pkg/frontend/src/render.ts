/** Canvas drawing: domain editor, field overlays, density views, curves.
 * Rendering is a pure function of the passed state — no internal caches. */
import { densityGray, fieldColor } from "./colormap.js";
import { siteGrid, ANCHOR_SITES } from "./sites.js";
import type { AnchorSel, EditorState, QuantizedGrid, Site } from "./types.js";

export interface OverlayFields {
  kind: "stress" | "strain";
  grid: number[][];
}

function sitePixel(nx: number, ny: number, site: Site, w: number, h: number) {
  const [ix, iy] = siteGrid(nx, ny, site);
  return { px: (ix / nx) * w, py: (1 - iy / ny) * h };
}

export function drawEditor(
  canvas: HTMLCanvasElement,
  state: EditorState,
  overlay: OverlayFields | null,
  valid: boolean,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#fafafa";
  ctx.fillRect(0, 0, w, h);

  if (overlay) drawField(ctx, overlay.grid, w, h);

  ctx.strokeStyle = "rgba(0,0,0,0.08)";
  ctx.lineWidth = 1;
  const step = Math.max(1, Math.floor(state.nx / 16));
  for (let i = 0; i <= state.nx; i += step) {
    const x = (i / state.nx) * w;
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, h);
    ctx.stroke();
  }
  for (let j = 0; j <= state.ny; j += step) {
    const y = (j / state.ny) * h;
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(w, y);
    ctx.stroke();
  }

  for (const site of ANCHOR_SITES) {
    const { px, py } = sitePixel(state.nx, state.ny, site, w, h);
    ctx.fillStyle = "rgba(60,60,60,0.25)";
    ctx.beginPath();
    ctx.arc(px, py, 5, 0, 2 * Math.PI);
    ctx.fill();
  }

  for (const anchor of state.anchors) drawAnchor(ctx, state, anchor, w, h);

  if (state.load) {
    const lx = state.load.x * w;
    const ly = (1 - state.load.y) * h;
    const theta = (state.load.angleDeg * Math.PI) / 180;
    const len = Math.min(w, h) * 0.18;
    // canvas y points down; domain y points up
    const tx = lx + len * Math.cos(theta);
    const ty = ly - len * Math.sin(theta);
    drawArrow(ctx, lx, ly, tx, ty, "#c62828");
    ctx.fillStyle = "#c62828";
    ctx.beginPath();
    ctx.arc(lx, ly, 4, 0, 2 * Math.PI);
    ctx.fill();
  }

  ctx.strokeStyle = valid ? "#2e7d32" : "#c62828";
  ctx.lineWidth = 3;
  ctx.strokeRect(1.5, 1.5, w - 3, h - 3);
}

function drawAnchor(
  ctx: CanvasRenderingContext2D,
  state: EditorState,
  anchor: AnchorSel,
  w: number,
  h: number,
): void {
  const a = sitePixel(state.nx, state.ny, anchor.site, w, h);
  ctx.strokeStyle = "#1565c0";
  ctx.fillStyle = "#1565c0";
  if (anchor.kind === "segment" && anchor.end) {
    const b = sitePixel(state.nx, state.ny, anchor.end, w, h);
    ctx.lineWidth = 6;
    ctx.beginPath();
    ctx.moveTo(a.px, a.py);
    ctx.lineTo(b.px, b.py);
    ctx.stroke();
  } else {
    ctx.fillRect(a.px - 6, a.py - 6, 12, 12);
  }
}

function drawArrow(
  ctx: CanvasRenderingContext2D,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  color: string,
): void {
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = 2.5;
  ctx.beginPath();
  ctx.moveTo(x0, y0);
  ctx.lineTo(x1, y1);
  ctx.stroke();
  const angle = Math.atan2(y1 - y0, x1 - x0);
  ctx.beginPath();
  ctx.moveTo(x1, y1);
  ctx.lineTo(x1 - 9 * Math.cos(angle - 0.45), y1 - 9 * Math.sin(angle - 0.45));
  ctx.lineTo(x1 - 9 * Math.cos(angle + 0.45), y1 - 9 * Math.sin(angle + 0.45));
  ctx.closePath();
  ctx.fill();
}

function drawField(
  ctx: CanvasRenderingContext2D,
  grid: number[][],
  w: number,
  h: number,
): void {
  const ny = grid.length;
  const nx = grid[0]?.length ?? 0;
  if (!nx) return;
  let max = 0;
  for (const row of grid) for (const v of row) max = Math.max(max, v);
  const cw = w / nx;
  const ch = h / ny;
  for (let y = 0; y < ny; y++) {
    for (let x = 0; x < nx; x++) {
      const [r, g, b] = fieldColor(grid[y][x], max);
      ctx.fillStyle = `rgba(${r},${g},${b},0.55)`;
      // row 0 is the bottom of the domain
      ctx.fillRect(x * cw, h - (y + 1) * ch, cw + 0.5, ch + 0.5);
    }
  }
}

export function drawDensity(canvas: HTMLCanvasElement, grid: number[][]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  const ny = grid.length;
  const nx = grid[0]?.length ?? 0;
  if (!nx) return;
  const cw = w / nx;
  const ch = h / ny;
  ctx.clearRect(0, 0, w, h);
  for (let y = 0; y < ny; y++) {
    for (let x = 0; x < nx; x++) {
      const g = densityGray(grid[y][x]);
      ctx.fillStyle = `rgb(${g},${g},${g})`;
      ctx.fillRect(x * cw, h - (y + 1) * ch, cw + 0.5, ch + 0.5);
    }
  }
}

export function quantizedToGrid(q: QuantizedGrid): number[][] {
  const grid: number[][] = [];
  for (let y = 0; y < q.ny; y++) {
    grid.push(q.q.slice(y * q.nx, (y + 1) * q.nx).map((v) => v / 255));
  }
  return grid;
}

export function drawDiff(canvas: HTMLCanvasElement, diff: boolean[][]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  const ny = diff.length;
  const nx = diff[0]?.length ?? 0;
  if (!nx) return;
  const cw = w / nx;
  const ch = h / ny;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, w, h);
  for (let y = 0; y < ny; y++) {
    for (let x = 0; x < nx; x++) {
      if (diff[y][x]) {
        ctx.fillStyle = "#e53935";
        ctx.fillRect(x * cw, h - (y + 1) * ch, cw + 0.5, ch + 0.5);
      }
    }
  }
}

export function drawCurve(
  canvas: HTMLCanvasElement,
  values: number[],
  color: string,
  logY = false,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#fcfcfc";
  ctx.fillRect(0, 0, w, h);
  if (values.length < 2) return;
  const ys = logY ? values.map((v) => Math.log10(Math.max(v, 1e-12))) : values;
  const lo = Math.min(...ys);
  const hi = Math.max(...ys);
  const span = hi - lo || 1;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ys.forEach((v, i) => {
    const x = (i / (ys.length - 1)) * (w - 8) + 4;
    const y = h - 4 - ((v - lo) / span) * (h - 8);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}
