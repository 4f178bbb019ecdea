"""Randomized generation of well-posed problems and optimized samples.

Every drawn problem is a pure function of its seed: one PCG64 stream per
seed, fixed draw order (anchor count, then per-retry anchors, load node,
load angle, volume fraction). Ill-posed configurations are rejected and
redrawn while holding the anchor count, so the count histogram stays
uniform over {1..4}.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from .fem import DesignDomain, LoadSpec, assemble, solve, strain_energy_density_field, von_mises_field
from .problem import (
    ANCHOR_SITES,
    SEGMENT_PAIRS,
    AnchorSpec,
    Problem,
    VF_RANGE,
    boundary_nodes,
    has_sufficient_supports,
    supports_from_anchors,
)
from .simp import SimpConfig, SimpError, binarize, optimize
from .store import DatasetWriter, Sample

MAX_REJECTIONS = 100


class SamplerError(Exception):
    pass


def _draw_anchor(rng: np.random.Generator) -> AnchorSpec:
    if rng.integers(0, 2) == 0:
        site = ANCHOR_SITES[rng.integers(0, len(ANCHOR_SITES))]
        return AnchorSpec.point(site)
    a, b = SEGMENT_PAIRS[rng.integers(0, len(SEGMENT_PAIRS))]
    return AnchorSpec.segment(a, b)


def sample_problem(seed: int, domain: DesignDomain = DesignDomain()) -> Problem:
    """Draw one well-posed problem. Deterministic in (seed, domain)."""
    rng = np.random.default_rng(np.random.PCG64(seed))
    k = int(rng.integers(1, 5))           # anchor count, held across retries
    for _ in range(MAX_REJECTIONS):
        anchors = tuple(_draw_anchor(rng) for _ in range(k))
        supports = supports_from_anchors(domain, anchors)
        segment_nodes = {n for a in anchors if a.kind == "segment"
                         for n in a.nodes(domain)}
        candidates = [n for n in boundary_nodes(domain) if n not in segment_nodes]
        if not candidates:
            continue                      # segments cover the whole boundary
        load_node = candidates[rng.integers(0, len(candidates))]
        theta = rng.uniform(0.0, 2.0 * np.pi)
        f = rng.uniform(*VF_RANGE)
        if load_node in supports.fixed_nodes():
            continue                      # load on a fixed point anchor
        if not has_sufficient_supports(domain, supports):
            continue                      # rigid mode survives the anchors
        return Problem(domain=domain, supports=supports,
                       load=LoadSpec(node=int(load_node),
                                     fx=float(np.cos(theta)),
                                     fy=float(np.sin(theta))),
                       volume_fraction=float(f), seed=int(seed),
                       anchors=anchors)
    raise SamplerError(f"seed {seed} rejected {MAX_REJECTIONS} times; "
                       "unsampleable configuration")


def conditioning_fields(problem: Problem,
                        solver_tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Von Mises stress and strain energy density on the full-material
    domain (rho = 1), raw magnitudes."""
    domain = problem.domain
    rho = np.ones(domain.n_elems)
    gk = assemble(domain, rho, p=1.0)
    sol = solve(gk, problem.load, problem.supports, tol=solver_tol)
    stress = von_mises_field(domain, rho, sol.displacements)
    strain = strain_energy_density_field(domain, rho, sol.displacements)
    return stress, strain


def generate_sample(problem: Problem,
                    simp_cfg: SimpConfig = SimpConfig()) -> Sample:
    """Optimize one problem and package the dataset record."""
    try:
        stress, strain = conditioning_fields(problem, simp_cfg.solver_tol)
        trace = optimize(problem, simp_cfg)
    except Exception as exc:
        raise SamplerError(f"sample generation failed for seed "
                           f"{problem.seed}: {exc}") from exc
    topology = binarize(trace.final_density, 0.5)
    load_x, load_y = problem.load_coords_normalized()
    return Sample(
        topology=topology.astype(np.float32),
        stress=stress.astype(np.float32),
        strain=strain.astype(np.float32),
        load_x=load_x, load_y=load_y,
        fx=problem.load.fx, fy=problem.load.fy,
        f=problem.volume_fraction,
        seed=problem.seed,
        compliance=trace.compliance_history[-1],
    )


def _produce(args) -> Sample:
    seed, nx, ny, cfg = args
    problem = sample_problem(seed, DesignDomain(nx=nx, ny=ny))
    return generate_sample(problem, cfg)


@dataclass
class DatasetSummary:
    count: int
    failures: int
    mean_compliance: float
    path: str
    split_path: str
    train_indices: list[int]
    val_indices: list[int]


def train_val_split(n: int, train_fraction: float = 0.9):
    """Deterministic 90/10 split by sample index: the leading block trains,
    the trailing block validates."""
    n_train = int(round(n * train_fraction))
    return list(range(n_train)), list(range(n_train, n))


def generate_dataset(n: int, base_seed: int, out_path: str,
                     simp_cfg: SimpConfig = SimpConfig(),
                     domain: DesignDomain = DesignDomain(),
                     workers: int = 1,
                     progress=None) -> DatasetSummary:
    """Generate samples for seeds base_seed..base_seed+n-1 and write them
    in seed order. Output bytes are independent of the worker count."""
    import json
    import os

    if n < 1:
        raise ValueError("need n >= 1")
    seeds = [(base_seed + i, domain.nx, domain.ny, simp_cfg) for i in range(n)]
    compliances = []
    try:
        with DatasetWriter(out_path, nx=domain.nx, ny=domain.ny) as writer:
            if workers > 1:
                with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
                    for sample in ex.map(_produce, seeds, chunksize=4):
                        writer.write(sample)
                        compliances.append(sample.compliance)
                        if progress is not None:
                            progress(len(compliances))
            else:
                for args in seeds:
                    sample = _produce(args)
                    writer.write(sample)
                    compliances.append(sample.compliance)
                    if progress is not None:
                        progress(len(compliances))
    except BaseException:
        if os.path.exists(out_path):
            os.unlink(out_path)           # no partial files
        raise
    train_idx, val_idx = train_val_split(n)
    split_path = out_path + ".split.json"
    with open(split_path, "w") as fh:
        json.dump({"train": train_idx, "val": val_idx}, fh)
    return DatasetSummary(count=n, failures=0,
                          mean_compliance=float(np.mean(compliances)),
                          path=out_path, split_path=split_path,
                          train_indices=train_idx, val_indices=val_idx)
