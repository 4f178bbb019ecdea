"""Checkpoint file format.

Layout (little-endian):

    magic "DITCKPT1" (8 bytes)
    version u32
    header_json_len u32 | header_json (utf-8)
    rng_len u32 | rng bytes (torch CPU RNG state)
    tensor_count u32
    per tensor: name_len u32 | name utf-8 | ndim u32 | dims u32 * ndim
                | data as float32

The JSON header carries the model config, step count, model name, noise
schedule parameters, and the last training loss. Optimizer moments are
stored as tensors named "adam.exp_avg.<param>" / "adam.exp_avg_sq.<param>";
model parameters as "param.<param>".
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
import torch

from .model import DiT, DiTConfig

MAGIC = b"DITCKPT1"
VERSION = 1
U32 = struct.Struct("<I")


class CheckpointError(Exception):
    pass


@dataclass
class Checkpoint:
    config: DiTConfig
    step: int
    model_name: str
    schedule: dict            # {"T": ..., "beta_start": ..., "beta_end": ...}
    last_loss: float | None
    rng_state: bytes
    tensors: dict[str, np.ndarray]

    def header_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "step": self.step,
            "model_name": self.model_name,
            "schedule": self.schedule,
            "last_loss": self.last_loss,
        }

    def build_model(self) -> DiT:
        model = DiT(self.config)
        state = {}
        for key, arr in self.tensors.items():
            if key.startswith("param."):
                state[key[len("param."):]] = torch.from_numpy(arr.copy())
        missing, unexpected = model.load_state_dict(state, strict=False)
        missing = [k for k in missing if k != "pos_embed"]
        if missing or unexpected:
            raise CheckpointError(
                f"parameter names do not match the config "
                f"(missing {missing}, unexpected {unexpected})")
        return model

    def build_optimizer(self, model: DiT, lr: float) -> torch.optim.Adam:
        opt = torch.optim.Adam(model.parameters(), lr=lr, foreach=False)
        named = dict(model.named_parameters())
        for name, param in named.items():
            m_key, v_key = f"adam.exp_avg.{name}", f"adam.exp_avg_sq.{name}"
            if m_key in self.tensors:
                opt.state[param] = {
                    "step": torch.tensor(float(self.step)),
                    "exp_avg": torch.from_numpy(self.tensors[m_key].copy()),
                    "exp_avg_sq": torch.from_numpy(self.tensors[v_key].copy()),
                }
        return opt


def _write_tensor(fh, name: str, arr: np.ndarray):
    raw = name.encode()
    fh.write(U32.pack(len(raw)))
    fh.write(raw)
    arr = np.ascontiguousarray(arr, dtype="<f4")
    fh.write(U32.pack(arr.ndim))
    for dim in arr.shape:
        fh.write(U32.pack(dim))
    fh.write(arr.tobytes())


def save_checkpoint(path: str, model: DiT, step: int, model_name: str,
                    schedule: dict, rng_state: bytes,
                    optimizer: torch.optim.Adam | None = None,
                    last_loss: float | None = None):
    tensors: list[tuple[str, np.ndarray]] = []
    for name, param in model.named_parameters():
        tensors.append((f"param.{name}",
                        param.detach().to(torch.float32).numpy()))
    if optimizer is not None:
        named = dict(model.named_parameters())
        for name, param in named.items():
            state = optimizer.state.get(param)
            if state:
                tensors.append((f"adam.exp_avg.{name}",
                                state["exp_avg"].to(torch.float32).numpy()))
                tensors.append((f"adam.exp_avg_sq.{name}",
                                state["exp_avg_sq"].to(torch.float32).numpy()))
    header = json.dumps({
        "config": model.cfg.to_dict(),
        "step": step,
        "model_name": model_name,
        "schedule": schedule,
        "last_loss": last_loss,
    }).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(U32.pack(VERSION))
        fh.write(U32.pack(len(header)))
        fh.write(header)
        fh.write(U32.pack(len(rng_state)))
        fh.write(rng_state)
        fh.write(U32.pack(len(tensors)))
        for name, arr in tensors:
            _write_tensor(fh, name, arr)


def _read_exact(fh, n: int, what: str) -> bytes:
    raw = fh.read(n)
    if len(raw) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return raw


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 8, "magic")
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}; not a checkpoint")
        (version,) = U32.unpack(_read_exact(fh, 4, "version"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (hlen,) = U32.unpack(_read_exact(fh, 4, "header length"))
        try:
            header = json.loads(_read_exact(fh, hlen, "header"))
            config = DiTConfig(**header["config"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"invalid checkpoint header: {exc}") from exc
        (rlen,) = U32.unpack(_read_exact(fh, 4, "rng length"))
        rng_state = _read_exact(fh, rlen, "rng state")
        (count,) = U32.unpack(_read_exact(fh, 4, "tensor count"))
        tensors = {}
        for _ in range(count):
            (nlen,) = U32.unpack(_read_exact(fh, 4, "tensor name length"))
            name = _read_exact(fh, nlen, "tensor name").decode()
            (ndim,) = U32.unpack(_read_exact(fh, 4, "tensor rank"))
            shape = tuple(U32.unpack(_read_exact(fh, 4, "tensor dim"))[0]
                          for _ in range(ndim))
            size = int(np.prod(shape, dtype=np.int64)) if shape else 1
            data = np.frombuffer(_read_exact(fh, 4 * size, f"tensor {name}"),
                                 dtype="<f4").reshape(shape)
            tensors[name] = data.copy()
    return Checkpoint(config=config, step=header["step"],
                      model_name=header["model_name"],
                      schedule=header["schedule"],
                      last_loss=header.get("last_loss"),
                      rng_state=rng_state, tensors=tensors)
