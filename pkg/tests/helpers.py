"""Shared test utilities: tiny datasets and the finite-difference oracle."""
import numpy as np
import torch

from topoforge.store import Sample, write_samples


def synthetic_samples(n, nx=8, ny=8, seed0=0):
    rng = np.random.default_rng(1234)
    samples = []
    for i in range(n):
        theta = rng.uniform(0, 2 * np.pi)
        samples.append(Sample(
            topology=(rng.uniform(0, 1, (ny, nx)) > 0.6).astype(np.float32),
            stress=rng.uniform(0, 4, (ny, nx)).astype(np.float32),
            strain=rng.uniform(0, 2, (ny, nx)).astype(np.float32),
            load_x=float(rng.uniform(0, 1)), load_y=float(rng.uniform(0, 1)),
            fx=float(np.cos(theta)), fy=float(np.sin(theta)),
            f=float(rng.uniform(0.3, 0.5)), seed=seed0 + i))
    return samples


def write_synthetic_dataset(path, n, nx=8, ny=8):
    write_samples(path, synthetic_samples(n, nx, ny), nx=nx, ny=ny)
    return path


def perturb_parameters(model, scale=0.05, seed=0):
    """Add noise to every parameter (wakes up zero-initialized layers so
    gradient checks probe a generic point)."""
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in model.parameters():
            p.add_(scale * torch.randn(p.shape, generator=g, dtype=p.dtype))


def finite_difference_check(model, loss_fn, h=1e-4, max_entries=None,
                            entry_seed=0):
    """Compare analytic gradients with central differences.

    Returns (worst_rel_error, per_param dict). ``loss_fn(model)`` must be a
    deterministic scalar. With ``max_entries`` set, a random subset of each
    parameter tensor is probed; otherwise every entry is.
    """
    model.zero_grad()
    loss = loss_fn(model)
    loss.backward()
    rng = np.random.default_rng(entry_seed)
    worst = 0.0
    report = {}
    for name, p in model.named_parameters():
        grad = p.grad.detach().clone().reshape(-1)
        flat = p.detach().reshape(-1)
        n = flat.numel()
        idx = (np.arange(n) if max_entries is None or n <= max_entries
               else rng.choice(n, size=max_entries, replace=False))
        param_worst = 0.0
        with torch.no_grad():
            for i in idx:
                orig = flat[i].item()
                flat[i] = orig + h
                up = float(loss_fn(model))
                flat[i] = orig - h
                dn = float(loss_fn(model))
                flat[i] = orig
                fd = (up - dn) / (2 * h)
                a = grad[i].item()
                # the floor absorbs directions whose true gradient is at
                # or below double-precision FD noise (e.g. key-projection
                # biases, which cancel exactly in softmax)
                rel = abs(a - fd) / max(abs(a), abs(fd), 1e-6)
                param_worst = max(param_worst, rel)
        report[name] = param_worst
        worst = max(worst, param_worst)
    return worst, report
