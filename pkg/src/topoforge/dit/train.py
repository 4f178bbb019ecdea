"""Training loop: epsilon-prediction MSE with Adam.

All randomness flows through one torch.Generator whose state is stored in
every checkpoint, so resuming reproduces the exact run (same thread
count). The per-step draw order is: batch indices, timesteps, noise.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import torch

from ..diffusion import NoiseSchedule, linear_schedule, q_sample
from ..store import Dataset
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .model import DiT, DiTConfig


class TrainingError(Exception):
    def __init__(self, message, last_checkpoint=None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-4
    total_steps: int = 1000
    seed: int = 0
    checkpoint_interval: int = 500
    precision: int = 32           # 64 for gradient checking
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    log1p_conditioning: bool = False   # optional transform, off by default

    def __post_init__(self):
        if min(self.batch_size, self.total_steps, self.checkpoint_interval,
               self.T) < 1 or self.learning_rate <= 0:
            raise ValueError("training settings must be positive")
        if self.precision not in (32, 64):
            raise ValueError("precision must be 32 or 64")

    @property
    def dtype(self) -> torch.dtype:
        return torch.float32 if self.precision == 32 else torch.float64

    def schedule(self) -> NoiseSchedule:
        return linear_schedule(self.T, self.beta_start, self.beta_end)

    def schedule_dict(self) -> dict:
        return {"T": self.T, "beta_start": self.beta_start,
                "beta_end": self.beta_end}


@dataclass
class TrainingData:
    """Dataset tensors kept in memory (desk scale)."""

    x0: torch.Tensor        # topology remapped to [-1, 1], (n, 1, H, W)
    stress: torch.Tensor    # (n, 1, H, W), raw
    strain: torch.Tensor    # (n, 1, H, W), raw
    cond: torch.Tensor      # (n, 5)
    topology01: torch.Tensor

    def __len__(self):
        return self.x0.shape[0]

    def to(self, dtype: torch.dtype) -> "TrainingData":
        return TrainingData(*(t.to(dtype) if t.is_floating_point() else t
                              for t in (self.x0, self.stress, self.strain,
                                        self.cond, self.topology01)))


def load_training_data(path: str, indices=None,
                       log1p_conditioning: bool = False) -> TrainingData:
    with Dataset(path) as ds:
        if indices is None:
            indices = range(len(ds))
        topo, stress, strain, cond = [], [], [], []
        for i in indices:
            s = ds.read(i)
            topo.append(s.topology)
            stress.append(s.stress)
            strain.append(s.strain)
            cond.append(s.conditioning_vector())
    topo01 = torch.from_numpy(np.stack(topo)).unsqueeze(1)
    stress_t = torch.from_numpy(np.stack(stress)).unsqueeze(1)
    strain_t = torch.from_numpy(np.stack(strain)).unsqueeze(1)
    if log1p_conditioning:
        stress_t = torch.log1p(stress_t)
        strain_t = torch.log1p(strain_t)
    return TrainingData(x0=2.0 * topo01 - 1.0, stress=stress_t,
                        strain=strain_t,
                        cond=torch.from_numpy(np.stack(cond)),
                        topology01=topo01)


def diffusion_loss(model: DiT, data: TrainingData, sched: NoiseSchedule,
                   generator: torch.Generator,
                   batch_size: int) -> torch.Tensor:
    """One-step epsilon-MSE on a random batch (indices, timesteps, noise
    drawn in that order from the generator)."""
    n = len(data)
    dtype = data.x0.dtype
    idx = torch.randint(0, n, (batch_size,), generator=generator)
    t = torch.randint(1, sched.T + 1, (batch_size,), generator=generator)
    eps = torch.randn((batch_size,) + tuple(data.x0.shape[1:]),
                      generator=generator, dtype=dtype)
    x0 = data.x0[idx]
    x_t = torch.from_numpy(
        q_sample(x0.numpy(), t.numpy(), eps.numpy(), sched)).to(dtype)
    pred = model(x_t, data.stress[idx], data.strain[idx], t, data.cond[idx])
    return torch.nn.functional.mse_loss(pred, eps)


@dataclass
class TrainResult:
    checkpoint_path: str
    losses: list[float] = field(default_factory=list)
    steps_run: int = 0
    start_step: int = 0
    model: DiT | None = None


def train(dataset_path: str, dit_cfg: DiTConfig, cfg: TrainConfig,
          out_path: str, model_name: str = "DiT",
          resume_from: str | None = None, log_path: str | None = None,
          indices=None, progress=None) -> TrainResult:
    """Train (or resume) and write checkpoints with full RNG state."""
    data = load_training_data(dataset_path, indices,
                              cfg.log1p_conditioning).to(cfg.dtype)
    sched = cfg.schedule()

    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
        if ckpt.config != dit_cfg:
            raise TrainingError("resume checkpoint config does not match")
        model = ckpt.build_model().to(cfg.dtype)
        optimizer = ckpt.build_optimizer(model, cfg.learning_rate)
        generator = torch.Generator()
        generator.set_state(torch.frombuffer(bytearray(ckpt.rng_state),
                                             dtype=torch.uint8).clone())
        start_step = ckpt.step
    else:
        torch.manual_seed(cfg.seed)
        model = DiT(dit_cfg).to(cfg.dtype)
        optimizer = torch.optim.Adam(model.parameters(),
                                     lr=cfg.learning_rate, foreach=False)
        generator = torch.Generator()
        generator.manual_seed(cfg.seed + 1)
        start_step = 0

    result = TrainResult(checkpoint_path=out_path, start_step=start_step,
                         model=model)
    log_fh = open(log_path, "a" if resume_from else "w",
                  newline="") if log_path else None
    writer = csv.writer(log_fh) if log_fh else None
    if writer and not resume_from:
        writer.writerow(["step", "loss"])

    def save(step, loss):
        save_checkpoint(out_path, model, step, model_name,
                        cfg.schedule_dict(),
                        generator.get_state().numpy().tobytes(),
                        optimizer=optimizer, last_loss=loss)

    last_saved = None
    try:
        model.train()
        for step in range(start_step + 1, cfg.total_steps + 1):
            optimizer.zero_grad()
            loss = diffusion_loss(model, data, sched, generator,
                                  cfg.batch_size)
            value = float(loss.detach())
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss at step {step}; last good checkpoint: "
                    f"{last_saved}", last_checkpoint=last_saved)
            loss.backward()
            optimizer.step()
            for p in model.parameters():
                if not torch.isfinite(p).all():
                    raise TrainingError(
                        f"non-finite parameters after step {step}; last good "
                        f"checkpoint: {last_saved}", last_checkpoint=last_saved)
            result.losses.append(value)
            result.steps_run += 1
            if writer:
                writer.writerow([step, f"{value:.10e}"])
            if progress is not None:
                progress(step, value)
            if step % cfg.checkpoint_interval == 0 or step == cfg.total_steps:
                save(step, value)
                last_saved = out_path
    finally:
        if log_fh:
            log_fh.close()
    return result
