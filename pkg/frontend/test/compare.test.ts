import { describe, expect, it } from "vitest";

import { diffCount, metricDeltas, recomputeVolumeMetrics, volumeFraction, xorDiff } from "../src/compare.js";
import { dragToAngleDeg, projectToBoundary, canvasToDomain } from "../src/geometry.js";
import { densityGray, fieldColor, logScale } from "../src/colormap.js";
import { parseSseBlock } from "../src/api.js";
import type { ResultMetrics, RunRecord } from "../src/types.js";

describe("comparison math", () => {
  const a = [
    [1, 0],
    [0.8, 0.2],
  ];
  const b = [
    [1, 0],
    [0.1, 0.9],
  ];

  it("self-diff is empty with zero deltas", () => {
    const diff = xorDiff(a, a);
    expect(diffCount(diff)).toBe(0);
    const metrics: ResultMetrics = {
      volume_fraction: 0.5,
      vf_error_pct: 1,
      floating_material: false,
      load_discrepancy: false,
      compliance: 10,
    };
    const deltas = metricDeltas(metrics, metrics);
    expect(deltas.volume_fraction).toBe(0);
    expect(deltas.compliance).toBe(0);
  });

  it("different grids produce a nonempty diff", () => {
    expect(diffCount(xorDiff(a, b))).toBe(2);
  });

  it("volume fraction counts binarized cells", () => {
    expect(volumeFraction(a)).toBe(0.5);
    expect(volumeFraction([[0.4]])).toBe(0);
  });

  it("recomputes the server volume metrics from the grid", () => {
    const record: RunRecord = {
      label: "r",
      engine: "simp",
      vf: 0.4,
      density: a,
      complianceHistory: [],
      volumeHistory: [],
      metrics: {
        volume_fraction: 0.5,
        vf_error_pct: 10.0,
        floating_material: false,
        load_discrepancy: false,
        compliance: 1,
      },
    };
    const recomputed = recomputeVolumeMetrics(record);
    expect(recomputed.volume_fraction).toBeCloseTo(record.metrics.volume_fraction, 12);
    expect(recomputed.vf_error_pct).toBeCloseTo(record.metrics.vf_error_pct, 12);
  });

  it("rejects mismatched shapes", () => {
    expect(() => xorDiff(a, [[1, 0, 0]])).toThrow(/shapes/);
  });
});

describe("pointer geometry", () => {
  it("maps drags to angles within a degree", () => {
    expect(dragToAngleDeg(0, 0, 1, 0)).toBeCloseTo(0, 6);
    expect(dragToAngleDeg(0.5, 0.5, 0.5, 0.9)).toBeCloseTo(90, 6);
    expect(dragToAngleDeg(0.5, 0.5, 0.5, 0.1)).toBeCloseTo(270, 6);
    expect(Math.abs(dragToAngleDeg(0.2, 0.2, 0.1, 0.1) - 225)).toBeLessThan(1);
  });

  it("projects interior points onto the closest edge", () => {
    expect(projectToBoundary(0.5, 0.1)).toEqual({ x: 0.5, y: 0 });
    expect(projectToBoundary(0.95, 0.5)).toEqual({ x: 1, y: 0.5 });
    expect(projectToBoundary(1.7, 0.5)).toEqual({ x: 1, y: 0.5 });
  });

  it("flips canvas y into domain coordinates", () => {
    expect(canvasToDomain(0, 0, 100, 100)).toEqual({ x: 0, y: 1 });
    expect(canvasToDomain(100, 100, 100, 100)).toEqual({ x: 1, y: 0 });
  });
});

describe("color scales", () => {
  it("log scale is monotone and clamped", () => {
    expect(logScale(0, 10)).toBe(0);
    const values = [0.1, 1, 5, 10];
    const ts = values.map((v) => logScale(v, 10));
    for (let i = 1; i < ts.length; i++) expect(ts[i]).toBeGreaterThan(ts[i - 1]);
    expect(ts[ts.length - 1]).toBeCloseTo(1, 12);
  });

  it("density gray maps solid to dark", () => {
    expect(densityGray(1)).toBe(0);
    expect(densityGray(0)).toBe(255);
  });

  it("field colors are valid rgb", () => {
    for (const v of [0, 0.5, 3, 10]) {
      const [r, g, b] = fieldColor(v, 10);
      for (const c of [r, g, b]) {
        expect(c).toBeGreaterThanOrEqual(0);
        expect(c).toBeLessThanOrEqual(255);
      }
    }
  });
});

describe("sse parsing", () => {
  it("parses event blocks", () => {
    const event = parseSseBlock("event: progress\ndata: {\"iteration\": 3}");
    expect(event?.event).toBe("progress");
    expect(event?.data.iteration).toBe(3);
  });

  it("ignores blocks without data", () => {
    expect(parseSseBlock("event: ping")).toBeNull();
  });
});
