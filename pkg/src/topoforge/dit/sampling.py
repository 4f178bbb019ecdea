"""DDIM sampling around a denoiser, plus the exact-noise oracle stub.

Denoisers implement ``predict(x_t, t, stress, strain, c) -> eps`` on
batched numpy arrays (B, H, W). Sampling keeps the state in float64 and
feeds the model float32 views, so runs are bit-reproducible from
(seed, plan).
"""
from __future__ import annotations

import time

import numpy as np
import torch

from ..diffusion import NoiseSchedule, TimestepPlan, ddim_step
from .checkpoint import Checkpoint
from .model import DiT


class ModelDenoiser:
    """Wraps a DiT for batched numpy prediction."""

    def __init__(self, model: DiT):
        self.model = model.eval()
        self.name = "dit"

    @staticmethod
    def from_checkpoint(ckpt: Checkpoint) -> "ModelDenoiser":
        return ModelDenoiser(ckpt.build_model())

    def predict(self, x_t, t, stress, strain, c):
        dtype = self.model.patch_embed.weight.dtype
        with torch.no_grad():
            out = self.model(
                torch.from_numpy(np.ascontiguousarray(x_t[:, None])).to(dtype),
                torch.from_numpy(np.ascontiguousarray(stress[:, None])).to(dtype),
                torch.from_numpy(np.ascontiguousarray(strain[:, None])).to(dtype),
                torch.from_numpy(np.ascontiguousarray(t)),
                torch.from_numpy(np.ascontiguousarray(c)).to(dtype),
            )
        return out[:, 0].double().numpy()


class EpsOracle:
    """Returns the exact noise for a known target topology: feeding its
    output to DDIM reproduces the target regardless of the plan."""

    def __init__(self, target_topology01: np.ndarray, sched: NoiseSchedule):
        self.x0 = 2.0 * np.asarray(target_topology01, dtype=np.float64) - 1.0
        self.sched = sched
        self.name = "oracle"

    def predict(self, x_t, t, stress, strain, c):
        tt = int(np.asarray(t).reshape(-1)[0])
        ab = self.sched.alpha_bar[tt]
        x0 = self.x0 if self.x0.ndim == x_t.ndim else self.x0[None]
        return (x_t - np.sqrt(ab) * x0) / np.sqrt(1.0 - ab)


def sample_batch(denoiser, stress, strain, c, plan: TimestepPlan,
                 seed: int, sched: NoiseSchedule):
    """Generate a batch of topologies.

    Returns (densities (B, H, W) in [0, 1], elapsed_seconds); the timer
    covers the denoising loop only, not model or batch setup.
    """
    stress = np.asarray(stress, dtype=np.float64)
    strain = np.asarray(strain, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if stress.ndim == 2:
        stress, strain, c = stress[None], strain[None], c[None]
    B, H, W = stress.shape
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal((B, H, W))
    start = time.perf_counter()
    for t, t_prev in plan.pairs():
        eps = denoiser.predict(x, np.full(B, t, dtype=np.int64),
                               stress, strain, c)
        x = ddim_step(x, eps, t, t_prev, sched)
    elapsed = time.perf_counter() - start
    return np.clip((x + 1.0) / 2.0, 0.0, 1.0), elapsed


def sample(denoiser, stress, strain, c, plan: TimestepPlan, seed: int,
           sched: NoiseSchedule) -> np.ndarray:
    """Single-problem convenience wrapper; returns (H, W) in [0, 1]."""
    densities, _ = sample_batch(denoiser, stress, strain, c, plan, seed, sched)
    return densities[0]
