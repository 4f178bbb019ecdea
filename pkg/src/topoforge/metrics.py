"""Evaluation metrics: compliance error, volume-fraction error, load
discrepancy, floating material, peak stress/strain, and suite aggregation.

Both topologies are binarized at 0.5 before comparison FEA (void elements
keep the Emin stiffness floor). Suite volume-fraction error is measured
against the ground truth's realized volume so an identity suite reports
exactly zero; the per-sample rows also carry the error against the
prescribed fraction.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .fem import FemError, assemble, solve, strain_energy_density_field, von_mises_field
from .problem import Problem
from .simp import binarize

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)
HIGH_ERROR_THRESHOLD_PCT = 30.0


@dataclass
class SampleEvaluation:
    index: int
    solvable: bool
    compliance_gen: float = np.nan
    compliance_gt: float = np.nan
    compliance_error_pct: float = np.nan        # signed
    vf_error_pct: float = np.nan                # |mean(gen) - mean(gt)| * 100
    vf_error_signed_pct: float = np.nan         # (mean(gen) - mean(gt)) * 100
    vf_error_vs_target_pct: float = np.nan      # |mean(gen) - f| * 100
    load_discrepant: bool = False
    floating: bool = False
    peak_stress_gen: float = np.nan
    peak_stress_gt: float = np.nan
    peak_strain_energy_gen: float = np.nan
    peak_strain_energy_gt: float = np.nan

    @property
    def compliance_error_abs_pct(self) -> float:
        return abs(self.compliance_error_pct)


@dataclass
class SuiteReport:
    mean_compliance_error_pct: float
    median_compliance_error_pct: float
    high_error_rate_pct: float          # |error| > 30%
    mean_vf_error_pct: float
    load_discrepancy_rate_pct: float
    floating_material_rate_pct: float
    solvable_count: int
    unsolvable_count: int
    note: str = ""
    samples: list[SampleEvaluation] = field(default_factory=list)

    def summary_rows(self) -> list[tuple[str, float]]:
        """The six headline metrics, in the conventional report order."""
        return [
            ("compliance_error_pct", self.mean_compliance_error_pct),
            ("compliance_error_above_30_pct", self.high_error_rate_pct),
            ("median_compliance_error_pct", self.median_compliance_error_pct),
            ("volume_fraction_error_pct", self.mean_vf_error_pct),
            ("load_discrepancy_pct", self.load_discrepancy_rate_pct),
            ("floating_material_pct", self.floating_material_rate_pct),
        ]


def _as_binary(topology: np.ndarray, problem: Problem) -> np.ndarray:
    topo = np.asarray(topology, dtype=float)
    if topo.shape != (problem.domain.ny, problem.domain.nx):
        raise ValueError(f"topology shape {topo.shape} does not match the "
                         f"problem grid")
    if not np.all((topo == 0.0) | (topo == 1.0)):
        topo = binarize(topo, 0.5)
    return topo


def compliance_of(topology: np.ndarray, problem: Problem,
                  p: float = 3.0, tol: float = 1e-8) -> float:
    """Compliance of a binarized topology under the problem's load."""
    topo = _as_binary(topology, problem)
    gk = assemble(problem.domain, topo.reshape(-1), p)
    sol = solve(gk, problem.load, problem.supports, tol=tol)
    return sol.compliance


def compliance_error(gen_topo: np.ndarray, gt_topo: np.ndarray,
                     problem: Problem) -> float:
    """Signed percent error 100 (C_gen - C_gt) / C_gt."""
    c_gen = compliance_of(gen_topo, problem)
    c_gt = compliance_of(gt_topo, problem)
    return 100.0 * (c_gen - c_gt) / c_gt


def volume_fraction_error(gen_topo: np.ndarray, f: float) -> float:
    """Absolute percentage-point gap between realized and reference volume."""
    return 100.0 * abs(float(np.mean(gen_topo)) - f)


def _load_adjacent_elements(problem: Problem) -> list[tuple[int, int]]:
    domain = problem.domain
    iy, ix = divmod(problem.load.node, domain.nx + 1)
    cells = []
    for ey in (iy - 1, iy):
        for ex in (ix - 1, ix):
            if 0 <= ex < domain.nx and 0 <= ey < domain.ny:
                cells.append((ey, ex))
    return cells


def load_discrepancy(gen_topo: np.ndarray, problem: Problem) -> bool:
    """True when no solid element lies within Chebyshev distance 1 of the
    elements touching the load node."""
    topo = _as_binary(gen_topo, problem)
    ny, nx = topo.shape
    for ey, ex in _load_adjacent_elements(problem):
        y0, y1 = max(0, ey - 1), min(ny, ey + 2)
        x0, x1 = max(0, ex - 1), min(nx, ex + 2)
        if np.any(topo[y0:y1, x0:x1] > 0.5):
            return False
    return True


def _anchored_cells(problem: Problem) -> set[tuple[int, int]]:
    """Elements adjacent to any supported node or to the load node."""
    domain = problem.domain
    cells = set(_load_adjacent_elements(problem))
    for node in problem.supports.fixed_nodes():
        iy, ix = divmod(node, domain.nx + 1)
        for ey in (iy - 1, iy):
            for ex in (ix - 1, ix):
                if 0 <= ex < domain.nx and 0 <= ey < domain.ny:
                    cells.add((ey, ex))
    return cells


def floating_material(gen_topo: np.ndarray, problem: Problem) -> bool:
    """True when some 8-connected solid component touches neither a
    support-adjacent element nor a load-adjacent element."""
    topo = _as_binary(gen_topo, problem)
    labels, n_components = ndimage.label(topo > 0.5, structure=EIGHT_CONNECTED)
    if n_components == 0:
        return False
    anchored = np.zeros(n_components + 1, dtype=bool)
    for ey, ex in _anchored_cells(problem):
        lab = labels[ey, ex]
        if lab > 0:
            anchored[lab] = True
    return bool(np.any(~anchored[1:]))


def peak_response(topology: np.ndarray, problem: Problem,
                  p: float = 3.0) -> tuple[float, float]:
    """(max von Mises stress, max strain energy density) over solid
    elements of the binarized topology; (0, 0) for an all-void field."""
    topo = _as_binary(topology, problem)
    solid = topo > 0.5
    if not np.any(solid):
        return 0.0, 0.0
    domain = problem.domain
    gk = assemble(domain, topo.reshape(-1), p)
    sol = solve(gk, problem.load, problem.supports)
    vm = von_mises_field(domain, topo.reshape(-1), sol.displacements, p)
    sed = strain_energy_density_field(domain, topo.reshape(-1),
                                      sol.displacements, p)
    return float(vm[solid].max()), float(sed[solid].max())


def evaluate_sample(index: int, gen_topo: np.ndarray, gt_topo: np.ndarray,
                    problem: Problem) -> SampleEvaluation:
    gen = _as_binary(gen_topo, problem)
    gt = _as_binary(gt_topo, problem)
    ev = SampleEvaluation(index=index, solvable=True)
    ev.load_discrepant = load_discrepancy(gen, problem)
    ev.floating = floating_material(gen, problem)
    try:
        ev.compliance_gen = compliance_of(gen, problem)
        ev.compliance_gt = compliance_of(gt, problem)
        ev.peak_stress_gen, ev.peak_strain_energy_gen = peak_response(gen, problem)
        ev.peak_stress_gt, ev.peak_strain_energy_gt = peak_response(gt, problem)
    except FemError:
        ev.solvable = False
        return ev
    ev.compliance_error_pct = (100.0 * (ev.compliance_gen - ev.compliance_gt)
                               / ev.compliance_gt)
    gt_vf = float(gt.mean())
    ev.vf_error_pct = volume_fraction_error(gen, gt_vf)
    ev.vf_error_signed_pct = 100.0 * (float(gen.mean()) - gt_vf)
    ev.vf_error_vs_target_pct = volume_fraction_error(gen, problem.volume_fraction)
    return ev


def evaluate_suite(generated: list[np.ndarray], ground_truth: list[np.ndarray],
                   problems: list[Problem]) -> SuiteReport:
    if not (len(generated) == len(ground_truth) == len(problems)):
        raise ValueError("generated, ground truth, and problems must align")
    samples = [evaluate_sample(i, g, t, p)
               for i, (g, t, p) in enumerate(zip(generated, ground_truth,
                                                 problems))]
    ok = [s for s in samples if s.solvable]
    if ok:
        abs_err = np.array([s.compliance_error_abs_pct for s in ok])
        mean_err = float(abs_err.mean())
        median_err = float(np.median(abs_err))
        high = float(100.0 * np.mean(abs_err > HIGH_ERROR_THRESHOLD_PCT))
        vf = float(np.mean([s.vf_error_pct for s in ok]))
        load_rate = float(100.0 * np.mean([s.load_discrepant for s in ok]))
        floating_rate = float(100.0 * np.mean([s.floating for s in ok]))
    else:
        mean_err = median_err = high = vf = load_rate = floating_rate = np.nan
    note = ""
    if ok and median_err > mean_err:
        note = "heavy-tailed: median exceeds mean"
    return SuiteReport(
        mean_compliance_error_pct=mean_err,
        median_compliance_error_pct=median_err,
        high_error_rate_pct=high,
        mean_vf_error_pct=vf,
        load_discrepancy_rate_pct=load_rate,
        floating_material_rate_pct=floating_rate,
        solvable_count=len(ok),
        unsolvable_count=len(samples) - len(ok),
        note=note,
        samples=samples,
    )


PER_SAMPLE_COLUMNS = [
    "index", "solvable", "compliance_gen", "compliance_gt",
    "compliance_error_signed_pct", "compliance_error_abs_pct",
    "vf_error_pct", "vf_error_signed_pct", "vf_error_vs_target_pct",
    "load_discrepant", "floating",
    "peak_stress_gen", "peak_stress_gt",
    "peak_strain_energy_gen", "peak_strain_energy_gt",
]


def write_per_sample_csv(report: SuiteReport, path: str):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PER_SAMPLE_COLUMNS)
        for s in report.samples:
            writer.writerow([
                s.index, int(s.solvable), s.compliance_gen, s.compliance_gt,
                s.compliance_error_pct, s.compliance_error_abs_pct,
                s.vf_error_pct, s.vf_error_signed_pct,
                s.vf_error_vs_target_pct,
                int(s.load_discrepant), int(s.floating),
                s.peak_stress_gen, s.peak_stress_gt,
                s.peak_strain_energy_gen, s.peak_strain_energy_gt,
            ])


def write_summary_csv(report: SuiteReport, path: str):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name, value in report.summary_rows():
            writer.writerow([name, value])
        writer.writerow(["solvable_count", report.solvable_count])
        writer.writerow(["unsolvable_count", report.unsolvable_count])
        if report.note:
            writer.writerow(["note", report.note])


def write_scatter_csv(report: SuiteReport, path: str):
    """Signed compliance vs signed volume error, and gen-vs-gt peaks."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "compliance_error_signed_pct",
                         "vf_error_signed_pct", "peak_stress_gen",
                         "peak_stress_gt", "peak_strain_energy_gen",
                         "peak_strain_energy_gt"])
        for s in report.samples:
            if s.solvable:
                writer.writerow([s.index, s.compliance_error_pct,
                                 s.vf_error_signed_pct, s.peak_stress_gen,
                                 s.peak_stress_gt, s.peak_strain_energy_gen,
                                 s.peak_strain_energy_gt])
