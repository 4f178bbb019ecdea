"""Noise schedules, the forward process, and reverse-step updates.

All functions are plain array math, independent of any denoiser. Schedule
tables are indexed 1..T with index 0 reserved for the clean-data
convention (alpha_bar[0] = 1, so t = 0 means no noise).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """Variance schedule tables. Arrays have length T + 1; entry 0 is the
    boundary convention (beta_0 = 0, alpha_0 = alpha_bar_0 = 1)."""

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        for arr in (self.beta, self.alpha, self.alpha_bar):
            arr.setflags(write=False)

    def validate(self):
        assert self.beta.shape == (self.T + 1,)
        assert self.beta[0] == 0.0 and self.alpha_bar[0] == 1.0
        assert np.all(self.beta[1:] > 0) and np.all(self.beta[1:] < 1)
        assert np.all(np.diff(self.alpha_bar) < 0)


def linear_schedule(T: int = 1000, beta_start: float = 1e-4,
                    beta_end: float = 0.02) -> NoiseSchedule:
    """Linearly interpolated betas, endpoints inclusive; 64-bit cumprod."""
    if T < 1:
        raise ValueError("need T >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("require 0 < beta_start <= beta_end < 1")
    beta = np.zeros(T + 1, dtype=np.float64)
    beta[1:] = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def _gather(table: np.ndarray, t, like: np.ndarray) -> np.ndarray:
    """Look up schedule entries for scalar or per-sample t, shaped to
    broadcast against ``like`` (leading batch axis)."""
    t = np.asarray(t)
    vals = table[t]
    if t.ndim == 0:
        return vals
    return vals.reshape((-1,) + (1,) * (like.ndim - 1))


def q_sample(x0: np.ndarray, t, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Closed-form forward marginal x_t = sqrt(ab_t) x0 + sqrt(1-ab_t) eps."""
    x0 = np.asarray(x0)
    eps = np.asarray(eps)
    if eps.shape != x0.shape:
        raise ValueError("eps must match x0's shape")
    ab = _gather(sched.alpha_bar, t, x0)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def ddpm_step(x_t: np.ndarray, eps_pred: np.ndarray, t: int, z: np.ndarray,
              sched: NoiseSchedule) -> np.ndarray:
    """One stochastic ancestral step t -> t-1.

    mu = (x_t - ((1 - a_t) / sqrt(1 - ab_t)) eps) / sqrt(a_t)
    sigma_t^2 = ((1 - ab_{t-1}) / (1 - ab_t)) beta_t
    The final step (t = 1) is deterministic: z is forced to zero.
    """
    if not 1 <= t <= sched.T:
        raise ValueError(f"timestep {t} outside [1, {sched.T}]")
    a_t = sched.alpha[t]
    ab_t = sched.alpha_bar[t]
    ab_prev = sched.alpha_bar[t - 1]
    mu = (x_t - (1.0 - a_t) / np.sqrt(1.0 - ab_t) * eps_pred) / np.sqrt(a_t)
    if t == 1:
        return mu
    sigma = np.sqrt((1.0 - ab_prev) / (1.0 - ab_t) * sched.beta[t])
    return mu + sigma * np.asarray(z)


def ddim_step(x_t: np.ndarray, eps_pred: np.ndarray, t: int, t_prev: int,
              sched: NoiseSchedule) -> np.ndarray:
    """Deterministic update t -> t_prev (t_prev = 0 returns the x0 estimate).

    x0_hat = (x_t - sqrt(1 - ab_t) eps) / sqrt(ab_t)
    x_prev = sqrt(ab_prev) x0_hat + sqrt(1 - ab_prev) eps
    """
    if not 0 <= t_prev <= t <= sched.T:
        raise ValueError(f"need 0 <= t_prev <= t <= T, got ({t_prev}, {t})")
    if t == 0 or t_prev == t:
        return np.asarray(x_t).copy()
    ab_t = sched.alpha_bar[t]
    ab_prev = sched.alpha_bar[t_prev]
    x0_hat = (x_t - np.sqrt(1.0 - ab_t) * eps_pred) / np.sqrt(ab_t)
    if t_prev == 0:
        return x0_hat
    return np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * eps_pred


@dataclass(frozen=True)
class TimestepPlan:
    """Strictly decreasing timesteps starting at T; the sampling loop adds
    the terminal hop to t = 0."""

    steps: tuple[int, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("plan must contain at least one step")
        if any(b >= a for a, b in zip(self.steps, self.steps[1:])):
            raise ValueError("steps must be strictly decreasing")
        if self.steps[-1] < 1:
            raise ValueError("steps must stay >= 1; t = 0 is the terminal hop")

    def __len__(self) -> int:
        return len(self.steps)

    def pairs(self) -> list[tuple[int, int]]:
        """(t, t_prev) hops, ending at t = 0; one denoiser call each."""
        targets = list(self.steps[1:]) + [0]
        return list(zip(self.steps, targets))


def make_plan(T: int, S: int) -> TimestepPlan:
    """Uniformly spaced plan of S steps from T down to 1."""
    if not 1 <= S <= T:
        raise ValueError(f"need 1 <= S <= T, got S={S}, T={T}")
    raw = np.linspace(T, 1, S)
    steps = np.unique(np.rint(raw).astype(int))[::-1]
    return TimestepPlan(steps=tuple(int(s) for s in steps))
