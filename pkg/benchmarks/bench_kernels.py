"""Benchmark the compiled kernel core against the pure NumPy fallback.

Usage: python3 benchmarks/bench_kernels.py [--grid 64] [--reps 5]

Times the three hot kernels (element energy gather, Jacobi-PCG solve,
sensitivity filter) and one full SIMP iteration on a cantilever, for both
backends. The compiled backend is skipped when the extension is absent.
"""
import argparse
import time

import numpy as np

from topoforge import _kernels
from topoforge.fem import DesignDomain, assemble
from topoforge.problem import cantilever
from topoforge.simp import RHO_MIN, SimpConfig, _filter_weights, optimize


def best_of(fn, reps):
    best = np.inf
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_backend(backend, grid, reps):
    dom = DesignDomain(nx=grid, ny=grid)
    rng = np.random.default_rng(0)
    rho = rng.uniform(0.3, 1.0, dom.n_elems)
    gk = assemble(dom, rho, 3.0)
    problem = cantilever(nx=grid, ny=grid, volume_fraction=0.4)
    fixed = problem.supports.sorted_dofs()
    mask = np.ones(dom.n_dofs, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    Kff = gk.matrix[free][:, free].tocsr()
    F = problem.load.force_vector(dom)[free]
    indptr = np.ascontiguousarray(Kff.indptr, np.int32)
    indices = np.ascontiguousarray(Kff.indices, np.int32)
    data = np.ascontiguousarray(Kff.data)
    diag = Kff.diagonal()
    u = rng.standard_normal(dom.n_dofs)
    ke = np.asarray(dom.unit_ke)
    f_indptr, f_indices, f_weights, f_rowsums = _filter_weights(grid, grid, 2.5)
    dc = -rng.uniform(0.1, 3.0, dom.n_elems)

    results = {}
    results["elem_energies"] = best_of(
        lambda: backend.elem_energies(u, dom.edof, ke), reps)
    results["pcg_solve"] = best_of(
        lambda: backend.pcg(indptr, indices, data, F, diag,
                            np.zeros(free.size), 1e-8, 30000), reps)
    results["filter_apply"] = best_of(
        lambda: backend.filter_apply(f_indptr, f_indices, f_weights,
                                     f_rowsums, rho, dc, RHO_MIN), reps)
    return results


def bench_simp_iteration(grid, reps):
    problem = cantilever(nx=grid, ny=grid, volume_fraction=0.4)
    cfg = SimpConfig(max_iters=3)
    return best_of(lambda: optimize(problem, cfg), reps) / 3.0


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--grid", type=int, default=64)
    parser.add_argument("--reps", type=int, default=5)
    args = parser.parse_args()

    backends = {"pure": _kernels.get_backend("pure")}
    try:
        backends["compiled"] = _kernels.get_backend("compiled")
    except ImportError:
        print("compiled kernels not built; benchmarking the fallback only")

    rows = {name: bench_backend(backend, args.grid, args.reps)
            for name, backend in backends.items()}

    kernels = ["elem_energies", "pcg_solve", "filter_apply"]
    header = f"{'kernel':<16}" + "".join(f"{name:>12}" for name in rows)
    if len(rows) == 2:
        header += f"{'speedup':>10}"
    print(f"grid {args.grid}x{args.grid}, best of {args.reps}")
    print(header)
    for kernel in kernels:
        line = f"{kernel:<16}"
        for name in rows:
            line += f"{rows[name][kernel] * 1e3:>10.2f}ms"
        if len(rows) == 2:
            line += f"{rows['pure'][kernel] / rows['compiled'][kernel]:>9.1f}x"
        print(line)

    # end to end, using whichever backend is active in this process
    per_iter = bench_simp_iteration(args.grid, max(2, args.reps // 2))
    print(f"\nfull SIMP iteration ({_kernels.BACKEND} backend active): "
          f"{per_iter * 1e3:.1f} ms")
    print("set TOPOFORGE_PURE_PYTHON=1 to rerun end-to-end on the fallback")


if __name__ == "__main__":
    main()
