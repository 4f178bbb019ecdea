"""Command-line interface: the full pipeline as subcommands.

Every run prints a reproduction line with the fully resolved options.
Exit codes: 0 success, 2 validation error, 3 runtime/numeric error.
A key=value config file can stand in for flags (flags win); the
TOPOFORGE_THREADS environment variable is the fallback for --threads.
"""
from __future__ import annotations

import dataclasses
import functools
import json
import os
import sys
import time

import click
import numpy as np

from .fem import DesignDomain, FemError, LoadSpec, assemble, solve
from .problem import (
    PRESETS,
    AnchorSpec,
    Problem,
    ProblemError,
    boundary_nodes,
    supports_from_anchors,
)
from .sampler import SamplerError, generate_dataset, sample_problem
from .simp import SimpConfig, SimpError, optimize
from .store import Dataset, DatasetFormatError
from . import store

PAPER_STEP_COUNTS = (1000, 250, 100, 25, 10, 5)
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def runtime_guard(fn):
    """Map domain failures to exit code 3 (validation stays on 2)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (click.ClickException, click.Abort):
            raise
        except (FemError, SimpError, SamplerError, DatasetFormatError,
                FloatingPointError, RuntimeError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


def repro_line(command: str, params: dict):
    parts = [f"--{key.replace('_', '-')} {value}"
             for key, value in sorted(params.items()) if value is not None]
    click.echo(f"# repro: topoforge {command} " + " ".join(parts))


def parse_config_file(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise click.BadParameter(
                    f"{path}:{line_no}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              default=None, help="key = value file supplying flag defaults")
@click.option("--threads", type=int, default=None,
              help="worker/compute threads (fallback: TOPOFORGE_THREADS)")
@click.pass_context
def main(ctx, config, threads):
    """Topology optimization, dataset generation, DiT training/sampling,
    evaluation, and the design service."""
    defaults = parse_config_file(config) if config else {}
    if threads is None:
        threads = int(defaults.pop("threads", 0)) or \
            int(os.environ.get("TOPOFORGE_THREADS", "0"))
    if threads:
        import torch
        torch.set_num_threads(threads)
    ctx.default_map = {cmd: dict(defaults) for cmd in
                       ("optimize", "gen-dataset", "train", "sample",
                        "eval", "subsample-study", "serve")}
    ctx.obj = {"threads": threads or 1}


def parse_problem_file(path: str) -> Problem:
    """Text problem format:

        grid 64 64
        anchor BL TL          (two sites: fixed segment)
        anchor MB             (one site: fixed point)
        load node 4128 angle 270
        load xy 1.0 0.5 angle 270    (alternative: normalized coords)
        vf 0.4
    """
    nx = ny = 64
    anchors: list[AnchorSpec] = []
    load_spec = None
    vf = None
    with open(path) as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            where = f"{path}:{line_no}"
            try:
                if parts[0] == "grid" and len(parts) == 3:
                    nx, ny = int(parts[1]), int(parts[2])
                elif parts[0] == "anchor" and len(parts) == 2:
                    anchors.append(AnchorSpec.point(parts[1]))
                elif parts[0] == "anchor" and len(parts) == 3:
                    anchors.append(AnchorSpec.segment(parts[1], parts[2]))
                elif parts[0] == "load" and parts[1] == "node" and len(parts) == 5:
                    load_spec = ("node", int(parts[2]), float(parts[4]))
                elif parts[0] == "load" and parts[1] == "xy" and len(parts) == 6:
                    load_spec = ("xy", float(parts[2]), float(parts[3]),
                                 float(parts[5]))
                elif parts[0] == "vf" and len(parts) == 2:
                    vf = float(parts[1])
                else:
                    raise click.BadParameter(f"{where}: unrecognized line {line!r}")
            except (ValueError, ProblemError) as exc:
                raise click.BadParameter(f"{where}: {exc}") from exc
    if not anchors or load_spec is None or vf is None:
        raise click.BadParameter(
            f"{path}: need at least one anchor, a load, and vf")
    domain = DesignDomain(nx=nx, ny=ny)
    if load_spec[0] == "node":
        node, angle = load_spec[1], load_spec[2]
        if not domain.is_boundary_node(node):
            raise click.BadParameter(f"load node {node} is not on the boundary")
    else:
        x, y, angle = load_spec[1], load_spec[2], load_spec[3]
        node = nearest_boundary_node(domain, x, y)
    theta = np.deg2rad(angle)
    try:
        return Problem(domain=domain,
                       supports=supports_from_anchors(domain, tuple(anchors)),
                       load=LoadSpec(node=node, fx=float(np.cos(theta)),
                                     fy=float(np.sin(theta))),
                       volume_fraction=vf, anchors=tuple(anchors))
    except ProblemError as exc:
        raise click.BadParameter(str(exc)) from exc


def nearest_boundary_node(domain: DesignDomain, x_norm: float,
                          y_norm: float) -> int:
    nodes = boundary_nodes(domain)
    xs = (nodes % (domain.nx + 1)) / domain.nx
    ys = (nodes // (domain.nx + 1)) / domain.ny
    return int(nodes[np.argmin((xs - x_norm) ** 2 + (ys - y_norm) ** 2)])


def write_density_text(path: str, rho: np.ndarray):
    np.savetxt(path, rho, fmt="%.8f",
               header=f"density grid {rho.shape[1]}x{rho.shape[0]}, "
                      "row 0 = bottom edge")


def read_density_text(path: str) -> np.ndarray:
    return np.loadtxt(path)


def write_pgm(path: str, rho: np.ndarray):
    """Plain PGM (P2), material dark, top row first."""
    levels = np.flipud(np.round(255 * (1.0 - np.clip(rho, 0, 1)))).astype(int)
    with open(path, "w") as fh:
        fh.write(f"P2\n{levels.shape[1]} {levels.shape[0]}\n255\n")
        for row in levels:
            fh.write(" ".join(str(v) for v in row) + "\n")


@main.command("optimize")
@click.option("--problem", "problem_path",
              type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None)
@click.option("--vf", type=float, default=None,
              help="override the problem's volume fraction")
@click.option("--iters", type=int, default=100)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@runtime_guard
def optimize_cmd(problem_path, preset, vf, iters, seed, out):
    """Run SIMP on a problem file or preset; write density + trace CSV."""
    if (problem_path is None) == (preset is None):
        raise click.BadParameter("give exactly one of --problem or --preset")
    if iters < 0:
        raise click.BadParameter("--iters must be >= 0")
    problem = (parse_problem_file(problem_path) if problem_path
               else PRESETS[preset]())
    if vf is not None:
        if not 0 < vf < 1:
            raise click.BadParameter("--vf must lie in (0, 1)")
        problem = dataclasses.replace(problem, volume_fraction=vf)
    repro_line("optimize", {
        "problem": problem_path, "preset": preset,
        "vf": problem.volume_fraction, "iters": iters, "seed": seed,
        "out": out})
    os.makedirs(out, exist_ok=True)
    domain = problem.domain
    if iters == 0:
        rho = np.full((domain.ny, domain.nx), problem.volume_fraction)
        gk = assemble(domain, rho.reshape(-1), 3.0)
        sol = solve(gk, problem.load, problem.supports)
        history = [(0, sol.compliance, problem.volume_fraction)]
        click.echo(f"uniform field compliance: {sol.compliance:.6f}")
    else:
        cfg = SimpConfig(max_iters=iters)
        trace = optimize(problem, cfg)
        rho = trace.final_density
        history = [(k, c, v) for k, (c, v) in
                   enumerate(zip(trace.compliance_history,
                                 trace.volume_history))]
        click.echo(f"final compliance: {trace.compliance_history[-1]:.6f}")
    write_density_text(os.path.join(out, "density.txt"), rho)
    write_pgm(os.path.join(out, "density.pgm"), rho)
    with open(os.path.join(out, "trace.csv"), "w") as fh:
        fh.write("iteration,compliance,volume\n")
        for k, c, v in history:
            fh.write(f"{k},{c:.10e},{v:.10e}\n")


@main.command("gen-dataset")
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--grid", type=int, default=64, help="square grid edge")
@click.option("--iters", type=int, default=100)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
@runtime_guard
def gen_dataset_cmd(ctx, n, seed, grid, iters, out):
    """Generate optimized, conditioned samples (seeds seed..seed+n-1)."""
    if n < 1:
        raise click.BadParameter("--n must be >= 1")
    repro_line("gen-dataset", {"n": n, "seed": seed, "grid": grid,
                               "iters": iters, "out": out})
    summary = generate_dataset(
        n, seed, out, SimpConfig(max_iters=iters),
        DesignDomain(nx=grid, ny=grid), workers=ctx.obj["threads"])
    info = {"count": summary.count, "failures": summary.failures,
            "mean_compliance": summary.mean_compliance,
            "train": len(summary.train_indices),
            "val": len(summary.val_indices),
            "split_file": summary.split_path}
    with open(out + ".summary.json", "w") as fh:
        json.dump(info, fh, indent=1)
    click.echo(json.dumps(info))


def parse_indices(spec: str, limit: int) -> list[int]:
    if ":" in spec:
        lo, hi = spec.split(":", 1)
        indices = list(range(int(lo or 0), int(hi or limit)))
    else:
        indices = [int(tok) for tok in spec.split(",") if tok]
    for i in indices:
        if not 0 <= i < limit:
            raise click.BadParameter(f"index {i} outside the dataset "
                                     f"(0..{limit - 1})")
    return indices


@main.command("train")
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--size", type=click.Choice(["tiny", "small", "base", "desk"]),
              default="desk")
@click.option("--patch", type=click.Choice(["2", "4", "8"]), default="4")
@click.option("--steps", type=int, default=1000)
@click.option("--batch", type=int, default=16)
@click.option("--lr", type=float, default=1e-4)
@click.option("--seed", type=int, default=0)
@click.option("--ckpt-interval", type=int, default=500)
@click.option("--resume", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--train-split/--all-samples", default=False,
              help="restrict to the dataset's train split file")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@runtime_guard
def train_cmd(dataset, size, patch, steps, batch, lr, seed, ckpt_interval,
              resume, train_split, out):
    """Train a DiT on a dataset; writes checkpoint + loss CSV."""
    from .dit import DiTConfig, TrainConfig, config_for, model_name, train
    from .dit.model import MODEL_SIZES

    patch = int(patch)
    with Dataset(dataset) as ds:
        img = ds.header.nx
        if ds.header.nx != ds.header.ny:
            raise click.BadParameter("training expects square grids")
    depth, dim, heads = MODEL_SIZES[size]
    dit_cfg = DiTConfig(img_size=img, patch_size=patch, depth=depth,
                        token_dim=dim, heads=heads)
    name = model_name(size, patch)
    cfg = TrainConfig(batch_size=batch, learning_rate=lr, total_steps=steps,
                      seed=seed, checkpoint_interval=ckpt_interval)
    indices = None
    if train_split:
        with open(dataset + ".split.json") as fh:
            indices = json.load(fh)["train"]
    repro_line("train", {"dataset": dataset, "size": size, "patch": patch,
                         "steps": steps, "batch": batch, "lr": lr,
                         "seed": seed, "out": out,
                         "resume": resume, "model": name})
    click.echo(f"model: {name} ({dit_cfg.depth} blocks, d={dit_cfg.token_dim}, "
               f"{dit_cfg.heads} heads, {dit_cfg.num_tokens} tokens)")
    result = train(dataset, dit_cfg, cfg, out, model_name=name,
                   resume_from=resume, log_path=out + ".loss.csv",
                   indices=indices)
    click.echo(f"steps {result.start_step + 1}..{cfg.total_steps} done; "
               f"final loss {result.losses[-1]:.6f}")


def _load_denoiser_and_schedule(ckpt_path, oracle, dataset_path, indices):
    """Returns (denoiser factory, schedule, image size). With --oracle the
    denoiser knows each target topology (pipeline testing without a model)."""
    from .diffusion import linear_schedule
    from .dit import EpsOracle, ModelDenoiser, load_checkpoint

    with Dataset(dataset_path) as ds:
        img = ds.header.nx
        records = [ds.read(i) for i in indices]
    if oracle:
        sched = linear_schedule(1000)
        targets = np.stack([r.topology for r in records]).astype(np.float64)
        return EpsOracle(targets, sched), sched, img, records
    ckpt = load_checkpoint(ckpt_path)
    if ckpt.config.img_size != img:
        raise click.BadParameter(
            f"checkpoint expects {ckpt.config.img_size}-pixel grids, "
            f"dataset has {img}")
    sched = linear_schedule(ckpt.schedule["T"], ckpt.schedule["beta_start"],
                            ckpt.schedule["beta_end"])
    return ModelDenoiser.from_checkpoint(ckpt), sched, img, records


def _validate_steps(steps: int, allow_any: bool):
    if steps not in PAPER_STEP_COUNTS and not allow_any:
        raise click.BadParameter(
            f"--steps {steps} is not in the benchmarked set "
            f"{sorted(PAPER_STEP_COUNTS)}; pass --allow-any-steps to force")


@main.command("sample")
@click.option("--ckpt", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--oracle", is_flag=True,
              help="exact-noise oracle stub instead of a checkpoint")
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--indices", default="0:8", help="range a:b or list i,j,k")
@click.option("--steps", type=int, default=250)
@click.option("--allow-any-steps", is_flag=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@runtime_guard
def sample_cmd(ckpt, oracle, dataset, indices, steps, allow_any_steps, seed,
               out):
    """Generate topologies for dataset conditioning rows; record timing."""
    from .diffusion import make_plan
    from .dit import sample_batch

    if (ckpt is None) == (not oracle):
        raise click.BadParameter("give exactly one of --ckpt or --oracle")
    _validate_steps(steps, allow_any_steps)
    with Dataset(dataset) as ds:
        idx = parse_indices(indices, len(ds))
    repro_line("sample", {"ckpt": ckpt, "oracle": oracle or None,
                          "dataset": dataset, "indices": indices,
                          "steps": steps, "seed": seed, "out": out})
    denoiser, sched, img, records = _load_denoiser_and_schedule(
        ckpt, oracle, dataset, idx)
    plan = make_plan(sched.T, steps)
    stress = np.stack([r.stress for r in records])
    strain = np.stack([r.strain for r in records])
    cond = np.stack([r.conditioning_vector() for r in records])
    densities, elapsed = sample_batch(denoiser, stress, strain, cond, plan,
                                      seed, sched)
    os.makedirs(out, exist_ok=True)
    for i, density in zip(idx, densities):
        write_density_text(os.path.join(out, f"gen_{i}.txt"), density)
        write_pgm(os.path.join(out, f"gen_{i}.pgm"), density)
    with open(os.path.join(out, "timing.csv"), "w") as fh:
        fh.write("steps,batch,seconds\n")
        fh.write(f"{steps},{len(idx)},{elapsed:.6f}\n")
    click.echo(f"sampled {len(idx)} topologies at {steps} steps "
               f"in {elapsed:.3f}s")


def _problems_for_records(records, img):
    """Rebuild each record's problem from its stored seed (supports and
    load are deterministic in the seed; the volume fraction comes from
    the record, which may differ for paired datasets)."""
    domain = DesignDomain(nx=img, ny=img)
    problems = []
    for r in records:
        p = sample_problem(r.seed, domain)
        problems.append(dataclasses.replace(p, volume_fraction=float(r.f)))
    return problems


@main.command("eval")
@click.option("--generated", type=click.Path(exists=True, file_okay=False),
              required=True, help="directory of gen_<i>.txt grids")
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--indices", default=None,
              help="defaults to every gen_<i>.txt present")
@click.option("--out", required=True, help="output CSV path prefix")
@runtime_guard
def eval_cmd(generated, dataset, indices, out):
    """Compare generated topologies against the dataset's ground truth."""
    from .metrics import (evaluate_suite, write_per_sample_csv,
                          write_scatter_csv, write_summary_csv)
    from .simp import binarize

    with Dataset(dataset) as ds:
        if indices is None:
            idx = sorted(
                int(name[4:-4]) for name in os.listdir(generated)
                if name.startswith("gen_") and name.endswith(".txt"))
            if not idx:
                raise click.BadParameter(f"no gen_<i>.txt files in {generated}")
            for i in idx:
                if i >= len(ds):
                    raise click.BadParameter(f"gen_{i}.txt has no dataset row")
        else:
            idx = parse_indices(indices, len(ds))
        records = [ds.read(i) for i in idx]
        img = ds.header.nx
    repro_line("eval", {"generated": generated, "dataset": dataset,
                        "indices": ",".join(map(str, idx)), "out": out})
    gens = [binarize(read_density_text(os.path.join(generated, f"gen_{i}.txt")))
            for i in idx]
    gts = [r.topology.astype(float) for r in records]
    problems = _problems_for_records(records, img)
    report = evaluate_suite(gens, gts, problems)
    write_per_sample_csv(report, out + ".per_sample.csv")
    write_summary_csv(report, out + ".summary.csv")
    write_scatter_csv(report, out + ".scatter.csv")
    for name, value in report.summary_rows():
        click.echo(f"{name}: {value:.4f}")


@main.command("subsample-study")
@click.option("--ckpt", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--oracle", is_flag=True)
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--indices", default="0:8")
@click.option("--steps-list", default="1000,250,100,25,10,5")
@click.option("--seed", type=int, default=0)
@click.option("--allow-any-steps", is_flag=True)
@click.option("--out", required=True, help="output CSV path")
@runtime_guard
def subsample_study_cmd(ckpt, oracle, dataset, indices, steps_list, seed,
                        allow_any_steps, out):
    """One evaluation row per DDIM step count, with timing."""
    from .diffusion import make_plan
    from .dit import sample_batch
    from .metrics import evaluate_suite
    from .simp import binarize

    if (ckpt is None) == (not oracle):
        raise click.BadParameter("give exactly one of --ckpt or --oracle")
    step_counts = [int(tok) for tok in steps_list.split(",") if tok]
    for s in step_counts:
        _validate_steps(s, allow_any_steps)
    with Dataset(dataset) as ds:
        idx = parse_indices(indices, len(ds))
    repro_line("subsample-study", {
        "ckpt": ckpt, "oracle": oracle or None, "dataset": dataset,
        "indices": indices, "steps-list": steps_list, "seed": seed,
        "out": out})
    denoiser, sched, img, records = _load_denoiser_and_schedule(
        ckpt, oracle, dataset, idx)
    stress = np.stack([r.stress for r in records])
    strain = np.stack([r.strain for r in records])
    cond = np.stack([r.conditioning_vector() for r in records])
    gts = [r.topology.astype(float) for r in records]
    problems = _problems_for_records(records, img)
    rows = []
    for s in step_counts:
        densities, elapsed = sample_batch(
            denoiser, stress, strain, cond, make_plan(sched.T, s), seed, sched)
        report = evaluate_suite([binarize(d) for d in densities], gts, problems)
        rows.append((s, elapsed, report))
        click.echo(f"steps {s}: {elapsed:.3f}s, mean compliance error "
                   f"{report.mean_compliance_error_pct:.3f}%")
    with open(out, "w") as fh:
        fh.write("steps,seconds," + ",".join(
            name for name, _ in rows[0][2].summary_rows()) + "\n")
        for s, elapsed, report in rows:
            values = ",".join(f"{value:.6f}"
                              for _, value in report.summary_rows())
            fh.write(f"{s},{elapsed:.6f},{values}\n")


@main.command("serve")
@click.option("--port", type=int, default=7878)
@click.option("--host", default="127.0.0.1")
@click.option("--checkpoint-dir", type=click.Path(file_okay=False),
              default=".")
@runtime_guard
def serve_cmd(port, host, checkpoint_dir):
    """Run the local design service."""
    import uvicorn

    from .service import create_app

    repro_line("serve", {"port": port, "host": host,
                         "checkpoint-dir": checkpoint_dir})
    uvicorn.run(create_app(checkpoint_dir=checkpoint_dir), host=host,
                port=port, log_level="warning")


if __name__ == "__main__":
    main()
