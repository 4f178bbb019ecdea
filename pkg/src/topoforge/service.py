"""Local HTTP design service: problem definition, live SIMP/DiT jobs with
server-sent-event streaming, checkpoint management.

Validation failures return 422 with a list of {code, msg, loc} entries;
the browser studio mirrors the same codes client-side. Job results are
pure functions of (problem, engine params, seed).
"""
from __future__ import annotations

import itertools
import json
import os
import queue
import threading
import uuid
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, Field

from .fem import DesignDomain, LoadSpec
from .problem import (
    ANCHOR_SITES,
    AnchorSpec,
    Problem,
    ProblemError,
    VF_RANGE,
    has_sufficient_supports,
    supports_from_anchors,
)
from .sampler import conditioning_fields
from .simp import SimpConfig, binarize, optimize
from .metrics import compliance_of, floating_material, load_discrepancy, volume_fraction_error

PAPER_STEP_COUNTS = (1000, 250, 100, 25, 10, 5)
MAX_ANCHORS = 4
PREVIEW_EDGE = 32      # progress-event density grids are at most this size


class AnchorIn(BaseModel):
    kind: Literal["point", "segment"]
    site: str
    end: str | None = None


class LoadIn(BaseModel):
    x: float
    y: float
    angle_deg: float


class ProblemIn(BaseModel):
    nx: int = 64
    ny: int = 64
    anchors: list[AnchorIn]
    load: LoadIn
    vf: float
    allow_any_vf: bool = False


class JobIn(BaseModel):
    problem_id: str
    engine: Literal["simp", "dit"]
    params: dict = Field(default_factory=dict)


class CheckpointLoadIn(BaseModel):
    path: str


def _fail(code: str, msg: str, loc: list):
    return {"code": code, "msg": msg, "loc": loc}


def validate_problem(body: ProblemIn) -> tuple[Problem, list[dict]]:
    """Returns (problem, errors); problem is None when errors exist.
    The studio's client-side validator mirrors these codes exactly."""
    errors = []
    if not 1 <= len(body.anchors) <= MAX_ANCHORS:
        errors.append(_fail("anchor_count",
                            f"anchor count must be 1..{MAX_ANCHORS}",
                            ["anchors"]))
    anchors = []
    for i, a in enumerate(body.anchors[:MAX_ANCHORS]):
        try:
            if a.kind == "point":
                if a.end is not None:
                    raise ProblemError("point anchors take no end")
                anchors.append(AnchorSpec.point(a.site))
            else:
                anchors.append(AnchorSpec.segment(a.site, a.end))
        except ProblemError as exc:
            errors.append(_fail("invalid_anchor", str(exc), ["anchors", i]))
    in_range = VF_RANGE[0] <= body.vf <= VF_RANGE[1]
    if not (0 < body.vf < 1) or (not in_range and not body.allow_any_vf):
        errors.append(_fail(
            "vf_out_of_range",
            f"volume fraction {body.vf} outside [{VF_RANGE[0]}, {VF_RANGE[1]}] "
            "(set allow_any_vf to override, within (0, 1))", ["vf"]))
    if not (0 <= body.load.x <= 1 and 0 <= body.load.y <= 1):
        errors.append(_fail("load_outside_domain",
                            "load coordinates must lie in [0, 1] x [0, 1]",
                            ["load"]))
    if errors:
        return None, errors
    try:
        domain = DesignDomain(nx=body.nx, ny=body.ny)
    except ValueError as exc:
        return None, [_fail("invalid_grid", str(exc), ["nx"])]
    supports = supports_from_anchors(domain, tuple(anchors))
    node = _nearest_boundary_node(domain, body.load.x, body.load.y)
    if node in supports.fixed_nodes():
        errors.append(_fail("load_on_support",
                            "load node coincides with a fixed node", ["load"]))
    if not has_sufficient_supports(domain, supports):
        errors.append(_fail("insufficient_supports",
                            "anchors leave a rigid-body motion unconstrained",
                            ["anchors"]))
    if errors:
        return None, errors
    theta = np.deg2rad(body.load.angle_deg)
    problem = Problem(domain=domain, supports=supports,
                      load=LoadSpec(node=node, fx=float(np.cos(theta)),
                                    fy=float(np.sin(theta))),
                      volume_fraction=body.vf, anchors=tuple(anchors))
    return problem, []


def _nearest_boundary_node(domain: DesignDomain, x: float, y: float) -> int:
    from .problem import boundary_nodes
    nodes = boundary_nodes(domain)
    xs = (nodes % (domain.nx + 1)) / domain.nx
    ys = (nodes // (domain.nx + 1)) / domain.ny
    return int(nodes[np.argmin((xs - x) ** 2 + (ys - y) ** 2)])


def downsample_density(rho: np.ndarray, edge: int = PREVIEW_EDGE):
    """Block-mean to <= edge pixels per side, quantized to 8 bits."""
    ny, nx = rho.shape
    fy = max(1, int(np.ceil(ny / edge)))
    fx = max(1, int(np.ceil(nx / edge)))
    py = (-ny) % fy
    px = (-nx) % fx
    padded = np.pad(rho, ((0, py), (0, px)), mode="edge")
    blocks = padded.reshape(padded.shape[0] // fy, fy,
                            padded.shape[1] // fx, fx).mean(axis=(1, 3))
    q = np.clip(np.round(255 * blocks), 0, 255).astype(int)
    return {"ny": q.shape[0], "nx": q.shape[1], "q": q.ravel().tolist()}


class Job:
    _counter = itertools.count()

    def __init__(self, kind: str):
        self.id = f"job-{next(Job._counter)}-{uuid.uuid4().hex[:8]}"
        self.kind = kind
        self.status = "queued"
        self.progress = 0
        self.events: list[dict] = []
        self.cond = threading.Condition()
        self.cancel_event = threading.Event()
        self.result = None
        self.error = None

    def emit(self, event: str, payload: dict):
        with self.cond:
            self.events.append({"event": event, "data": payload})
            self.cond.notify_all()

    def finish(self, status: str, result=None, error=None):
        with self.cond:
            self.status = status
            self.result = result
            self.error = error
            payload = {"status": status}
            if result is not None:
                payload.update(result)
            if error is not None:
                payload["error"] = error
            self.events.append({"event": "done" if status == "done" else status,
                                "data": payload})
            self.cond.notify_all()

    @property
    def terminal(self) -> bool:
        return self.status in ("done", "failed", "cancelled")

    def state_dict(self) -> dict:
        return {"job_id": self.id, "kind": self.kind, "status": self.status,
                "progress": self.progress,
                "result": self.result if self.terminal else None,
                "error": self.error}


def _result_metrics(density: np.ndarray, problem: Problem) -> dict:
    topo = binarize(density, 0.5)
    metrics = {
        "volume_fraction": float(topo.mean()),
        "vf_error_pct": volume_fraction_error(topo, problem.volume_fraction),
        "floating_material": bool(floating_material(topo, problem)),
        "load_discrepancy": bool(load_discrepancy(topo, problem)),
    }
    try:
        metrics["compliance"] = compliance_of(topo, problem)
    except Exception as exc:    # disconnected results can defeat the solver
        metrics["compliance"] = None
        metrics["compliance_error_detail"] = str(exc)
    return metrics


def create_app(checkpoint_dir: str = ".", job_slots: int = 2) -> FastAPI:
    app = FastAPI(title="topoforge design service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    problems: dict[str, dict] = {}
    jobs: dict[str, Job] = {}
    registry_lock = threading.Lock()
    slots = threading.Semaphore(job_slots)
    current_checkpoint: dict = {}

    @app.post("/api/problems")
    def create_problem(body: ProblemIn):
        problem, errors = validate_problem(body)
        if errors:
            raise HTTPException(status_code=422, detail=errors)
        stress, strain = conditioning_fields(problem)
        pid = f"prob-{uuid.uuid4().hex[:12]}"
        with registry_lock:
            problems[pid] = {"problem": problem, "stress": stress,
                             "strain": strain}
        return {
            "problem_id": pid,
            "nx": problem.domain.nx, "ny": problem.domain.ny,
            "load_node": problem.load.node,
            "load_xy": list(problem.load_coords_normalized()),
            "stress": stress.tolist(),
            "strain": strain.tolist(),
        }

    def run_simp(job: Job, entry: dict, params: dict):
        problem: Problem = entry["problem"]
        iters = int(params.get("iters", 100))
        cfg = SimpConfig(max_iters=iters)

        def cb(k, compliance, volume, rho):
            job.progress = k + 1
            job.emit("progress", {
                "iteration": k, "compliance": compliance, "volume": volume,
                "density": downsample_density(rho)})
            return not job.cancel_event.is_set()

        trace = optimize(problem, cfg, callback=cb)
        if trace.cancelled:
            job.finish("cancelled")
            return
        density = trace.final_density
        job.finish("done", {
            "density": density.tolist(),
            "compliance_history": trace.compliance_history,
            "volume_history": trace.volume_history,
            "metrics": _result_metrics(density, problem)})

    def run_dit(job: Job, entry: dict, params: dict):
        from .diffusion import linear_schedule, make_plan
        from .dit import ModelDenoiser, load_checkpoint
        from .diffusion import ddim_step

        problem: Problem = entry["problem"]
        ckpt_path = params.get("checkpoint") or current_checkpoint.get("path")
        if not ckpt_path:
            raise ValueError("no checkpoint loaded; POST /api/checkpoints/load "
                             "or pass params.checkpoint")
        ckpt = load_checkpoint(ckpt_path)
        if ckpt.config.img_size != problem.domain.nx:
            raise ValueError(
                f"checkpoint expects {ckpt.config.img_size}-pixel grids")
        steps = int(params.get("steps", 250))
        if steps not in PAPER_STEP_COUNTS and not params.get("allow_any_steps"):
            raise ValueError(f"steps must be one of {sorted(PAPER_STEP_COUNTS)}")
        seed = int(params.get("seed", 0))
        sched = linear_schedule(ckpt.schedule["T"],
                                ckpt.schedule["beta_start"],
                                ckpt.schedule["beta_end"])
        plan = make_plan(sched.T, steps)
        preview_stride = max(1, len(plan) // 25)
        denoiser = ModelDenoiser.from_checkpoint(ckpt)
        stress = entry["stress"][None].astype(np.float64)
        strain = entry["strain"][None].astype(np.float64)
        lx, ly = problem.load_coords_normalized()
        c = np.array([[lx, ly, problem.load.fx, problem.load.fy,
                       problem.volume_fraction]])
        rng = np.random.Generator(np.random.PCG64(seed))
        x = rng.standard_normal(stress.shape)
        for hop, (t, t_prev) in enumerate(plan.pairs()):
            if job.cancel_event.is_set():
                job.finish("cancelled")
                return
            eps = denoiser.predict(x, np.array([t]), stress, strain, c)
            x = ddim_step(x, eps, t, t_prev, sched)
            job.progress = hop + 1
            if hop % preview_stride == 0 or t_prev == 0:
                x0_preview = np.clip((x[0] + 1) / 2, 0, 1)
                job.emit("progress", {
                    "step": hop, "timestep": int(t_prev),
                    "density": downsample_density(x0_preview)})
        density = np.clip((x[0] + 1) / 2, 0, 1)
        job.finish("done", {
            "density": density.tolist(),
            "metrics": _result_metrics(density, problem)})

    def worker(job: Job, runner, entry, params):
        with slots:
            if job.cancel_event.is_set():
                job.finish("cancelled")
                return
            job.status = "running"
            try:
                runner(job, entry, params)
            except Exception as exc:
                job.finish("failed", error=str(exc))

    @app.post("/api/jobs")
    def create_job(body: JobIn):
        with registry_lock:
            entry = problems.get(body.problem_id)
        if entry is None:
            raise HTTPException(status_code=404,
                                detail=[_fail("unknown_problem",
                                              f"no problem {body.problem_id}",
                                              ["problem_id"])])
        job = Job(kind=body.engine)
        with registry_lock:
            jobs[job.id] = job
        runner = run_simp if body.engine == "simp" else run_dit
        threading.Thread(target=worker, args=(job, runner, entry, body.params),
                         daemon=True).start()
        return {"job_id": job.id, "status": job.status}

    def get_job_or_404(job_id: str) -> Job:
        with registry_lock:
            job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404,
                                detail=[_fail("unknown_job",
                                              f"no job {job_id}", ["job_id"])])
        return job

    @app.get("/api/jobs/{job_id}")
    def job_state(job_id: str):
        return get_job_or_404(job_id).state_dict()

    @app.get("/api/jobs/{job_id}/events")
    def job_events(job_id: str):
        job = get_job_or_404(job_id)

        def stream():
            cursor = 0
            while True:
                with job.cond:
                    while cursor >= len(job.events) and not job.terminal:
                        job.cond.wait(timeout=30.0)
                    chunk = job.events[cursor:]
                    cursor = len(job.events)
                    ended = job.terminal and cursor == len(job.events)
                for item in chunk:
                    yield (f"event: {item['event']}\n"
                           f"data: {json.dumps(item['data'])}\n\n")
                if ended and cursor == len(job.events):
                    return

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.delete("/api/jobs/{job_id}")
    def cancel_job(job_id: str):
        job = get_job_or_404(job_id)
        if job.terminal:
            raise HTTPException(status_code=409,
                                detail=[_fail("already_finished",
                                              f"job is {job.status}",
                                              ["job_id"])])
        job.cancel_event.set()
        return {"job_id": job.id, "status": "cancelling"}

    @app.get("/api/checkpoints")
    def list_checkpoints():
        from .dit import CheckpointError, load_checkpoint
        out = []
        for name in sorted(os.listdir(checkpoint_dir)):
            if not name.endswith(".ckpt"):
                continue
            path = os.path.join(checkpoint_dir, name)
            try:
                ckpt = load_checkpoint(path)
            except (CheckpointError, OSError):
                continue
            out.append({"path": path, "model_name": ckpt.model_name,
                        "step": ckpt.step,
                        "patch_size": ckpt.config.patch_size,
                        "img_size": ckpt.config.img_size,
                        "token_dim": ckpt.config.token_dim,
                        "depth": ckpt.config.depth})
        return out

    @app.post("/api/checkpoints/load")
    def load_checkpoint_route(body: CheckpointLoadIn):
        from .dit import CheckpointError, load_checkpoint
        try:
            ckpt = load_checkpoint(body.path)
        except (CheckpointError, OSError) as exc:
            raise HTTPException(status_code=422,
                                detail=[_fail("bad_checkpoint", str(exc),
                                              ["path"])])
        current_checkpoint["path"] = body.path
        return {"path": body.path, "model_name": ckpt.model_name,
                "step": ckpt.step, "schedule": ckpt.schedule,
                "config": ckpt.config.to_dict()}

    return app
