from collections import deque

import numpy as np
import pytest

from topoforge.metrics import (
    compliance_error,
    compliance_of,
    evaluate_suite,
    floating_material,
    load_discrepancy,
    peak_response,
    volume_fraction_error,
    write_per_sample_csv,
    write_scatter_csv,
    write_summary_csv,
)
from topoforge.problem import Problem, cantilever
from topoforge.sampler import generate_sample, sample_problem
from topoforge.fem import DesignDomain
from topoforge.simp import SimpConfig


def flood_fill_floating_oracle(topo, problem):
    """Independent BFS flood fill over 8-neighborhoods."""
    ny, nx = topo.shape
    solid = topo > 0.5
    seen = np.zeros_like(solid, dtype=bool)
    anchored_cells = set()
    nodes = set(problem.supports.fixed_nodes())
    nodes.add(problem.load.node)
    for node in nodes:
        iy, ix = divmod(node, nx + 1)
        for ey in (iy - 1, iy):
            for ex in (ix - 1, ix):
                if 0 <= ex < nx and 0 <= ey < ny:
                    anchored_cells.add((ey, ex))
    for sy in range(ny):
        for sx in range(nx):
            if not solid[sy, sx] or seen[sy, sx]:
                continue
            queue = deque([(sy, sx)])
            seen[sy, sx] = True
            component = []
            while queue:
                y, x = queue.popleft()
                component.append((y, x))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        yy, xx = y + dy, x + dx
                        if (0 <= yy < ny and 0 <= xx < nx
                                and solid[yy, xx] and not seen[yy, xx]):
                            seen[yy, xx] = True
                            queue.append((yy, xx))
            if not any(c in anchored_cells for c in component):
                return True
    return False


@pytest.fixture(scope="module")
def small_problem():
    return cantilever(nx=16, ny=16, volume_fraction=0.4)


@pytest.fixture(scope="module")
def optimized_pair():
    problem = sample_problem(11, DesignDomain(nx=16, ny=16))
    sample = generate_sample(problem, SimpConfig(max_iters=40))
    return problem, sample.topology.astype(float)


class TestComplianceError:
    def test_identity_is_zero(self, optimized_pair):
        problem, topo = optimized_pair
        assert compliance_error(topo, topo, problem) == 0.0

    def test_all_solid_is_stiffer(self, optimized_pair):
        problem, topo = optimized_pair
        solid = np.ones_like(topo)
        err = compliance_error(solid, topo, problem)
        assert err < 0.0
        c_solid = compliance_of(solid, problem)
        c_gt = compliance_of(topo, problem)
        assert abs(err - 100 * (c_solid - c_gt) / c_gt) < 1e-12

    def test_cutting_load_path_hurts(self, small_problem):
        problem = small_problem
        gt = np.ones((16, 16))
        cut = gt.copy()
        cut[:, 8] = 0.0        # sever a full column
        err = compliance_error(cut, gt, problem)
        assert err > 10.0


class TestVolumeFractionError:
    def test_exact_match(self):
        topo = np.zeros((4, 4))
        topo[:2] = 1.0
        assert volume_fraction_error(topo, 0.5) == 0.0

    def test_all_ones_vs_04(self):
        assert volume_fraction_error(np.ones((8, 8)), 0.4) == pytest.approx(60.0)

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(0)
        topo = (rng.uniform(0, 1, (16, 16)) > 0.5).astype(float)
        f = 0.37
        expected = abs(np.count_nonzero(topo) / topo.size - f) * 100
        assert volume_fraction_error(topo, f) == pytest.approx(expected, abs=1e-12)


class TestLoadDiscrepancy:
    def test_solid_at_load_is_fine(self, small_problem):
        topo = np.ones((16, 16))
        assert load_discrepancy(topo, small_problem) is False

    def test_empty_neighborhood_flags(self, small_problem):
        assert load_discrepancy(np.zeros((16, 16)), small_problem) is True

    def test_matches_brute_force_scan(self, small_problem):
        problem = small_problem
        rng = np.random.default_rng(1)
        iy, ix = divmod(problem.load.node, 17)
        load_cells = [(ey, ex) for ey in (iy - 1, iy) for ex in (ix - 1, ix)
                      if 0 <= ex < 16 and 0 <= ey < 16]
        for _ in range(300):
            topo = (rng.uniform(0, 1, (16, 16)) > 0.9).astype(float)
            flag = load_discrepancy(topo, problem)
            # O(n) oracle: direct Chebyshev distance scan
            solid = np.argwhere(topo > 0.5)
            near = any(max(abs(sy - ey), abs(sx - ex)) <= 1
                       for sy, sx in solid for ey, ex in load_cells)
            assert flag == (not near)


class TestFloatingMaterial:
    def test_connected_to_support_is_fine(self, small_problem):
        topo = np.zeros((16, 16))
        topo[7:9, :] = 1.0     # beam from the clamped edge to the load edge
        assert floating_material(topo, small_problem) is False

    def test_isolated_island_flags(self, small_problem):
        topo = np.zeros((16, 16))
        topo[7:9, :] = 1.0
        topo[12:14, 4:6] = 1.0     # island away from supports and load
        assert floating_material(topo, small_problem) is True

    def test_thousand_random_grids_match_flood_fill(self, small_problem):
        rng = np.random.default_rng(2)
        agree = 0
        for _ in range(1000):
            topo = (rng.uniform(0, 1, (16, 16)) > rng.uniform(0.3, 0.9)).astype(float)
            if floating_material(topo, small_problem) == \
                    flood_fill_floating_oracle(topo, small_problem):
                agree += 1
        assert agree == 1000

    def test_diagonal_struts_count_as_connected(self, small_problem):
        topo = np.zeros((16, 16))
        for i in range(16):
            topo[i, i] = 1.0    # diagonal chain from the support corner
        assert floating_material(topo, small_problem) is False


class TestPeakResponse:
    def test_zero_load_gives_zero_peaks(self):
        import dataclasses
        problem = cantilever(nx=8, ny=8)
        problem = dataclasses.replace(
            problem, load=dataclasses.replace(problem.load, fx=0.0, fy=0.0))
        vm, sed = peak_response(np.ones((8, 8)), problem)
        assert vm == 0.0 and sed == 0.0

    def test_identical_topologies_identical_peaks(self, optimized_pair):
        problem, topo = optimized_pair
        a = peak_response(topo, problem)
        b = peak_response(topo, problem)
        assert a == b

    def test_peaks_exclude_void_elements(self, optimized_pair):
        problem, topo = optimized_pair
        vm, sed = peak_response(topo, problem)
        assert np.isfinite(vm) and np.isfinite(sed)
        assert vm >= 0 and sed >= 0


class TestEvaluateSuite:
    def test_identity_suite_all_zero(self, optimized_pair):
        problem, topo = optimized_pair
        report = evaluate_suite([topo] * 5, [topo] * 5, [problem] * 5)
        assert report.mean_compliance_error_pct == 0.0
        assert report.median_compliance_error_pct == 0.0
        assert report.high_error_rate_pct == 0.0
        assert report.mean_vf_error_pct == 0.0
        assert report.load_discrepancy_rate_pct == 0.0
        assert report.floating_material_rate_pct == 0.0
        assert report.solvable_count == 5
        assert report.unsolvable_count == 0

    def test_one_corrupted_among_ten(self, optimized_pair):
        problem, topo = optimized_pair
        bad = np.zeros_like(topo)
        bad[:2, :2] = 1.0       # support corner blob only
        gens = [topo] * 9 + [bad]
        report = evaluate_suite(gens, [topo] * 10, [problem] * 10)
        assert report.high_error_rate_pct == pytest.approx(10.0)

    def test_aggregates_match_recomputation(self, optimized_pair):
        problem, topo = optimized_pair
        rng = np.random.default_rng(3)
        gens = []
        for _ in range(6):
            noisy = topo.copy()
            flips = rng.integers(0, 16, size=(5, 2))
            for y, x in flips:
                noisy[y, x] = 1.0 - noisy[y, x]
            gens.append(noisy)
        report = evaluate_suite(gens, [topo] * 6, [problem] * 6)
        ok = [s for s in report.samples if s.solvable]
        abs_err = [abs(s.compliance_error_pct) for s in ok]
        assert report.mean_compliance_error_pct == pytest.approx(np.mean(abs_err))
        assert report.median_compliance_error_pct == pytest.approx(np.median(abs_err))
        assert report.mean_vf_error_pct == pytest.approx(
            np.mean([s.vf_error_pct for s in ok]))
        assert report.solvable_count + report.unsolvable_count == 6

    def test_csv_outputs(self, optimized_pair, tmp_path):
        problem, topo = optimized_pair
        report = evaluate_suite([topo] * 2, [topo] * 2, [problem] * 2)
        per, summ, scat = (str(tmp_path / n) for n in
                           ("per.csv", "summary.csv", "scatter.csv"))
        write_per_sample_csv(report, per)
        write_summary_csv(report, summ)
        write_scatter_csv(report, scat)
        summary = open(summ).read().splitlines()
        metrics = [row.split(",")[0] for row in summary[1:7]]
        assert metrics == ["compliance_error_pct",
                           "compliance_error_above_30_pct",
                           "median_compliance_error_pct",
                           "volume_fraction_error_pct",
                           "load_discrepancy_pct",
                           "floating_material_pct"]
        assert len(open(per).read().splitlines()) == 3
        assert len(open(scat).read().splitlines()) == 3

    def test_misaligned_inputs_rejected(self, optimized_pair):
        problem, topo = optimized_pair
        with pytest.raises(ValueError):
            evaluate_suite([topo], [topo, topo], [problem])
