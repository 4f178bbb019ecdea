"""Diffusion-transformer denoiser with hybrid conditioning.

The spatial input is the channel concatenation (noisy topology, stress,
strain); global descriptors [load_x, load_y, fx, fy, f] and the timestep
feed the per-block adaptive layer-norm modulation. Blocks are gated
residuals h <- h + alpha * f(gamma * LN(h) + beta); zero-initializing the
modulation MLPs makes every block the identity at init.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn as nn

# depth, token dim, heads per named size; "desk" is the test-scale config
MODEL_SIZES = {
    "tiny": (8, 192, 3),
    "small": (12, 384, 6),
    "base": (12, 768, 12),
    "desk": (4, 64, 4),
}
SIZE_LETTER = {"tiny": "T", "small": "S", "base": "B", "desk": "D"}
PATCH_SIZES = (2, 4, 8)


@dataclass(frozen=True)
class DiTConfig:
    img_size: int = 64
    patch_size: int = 4
    in_channels: int = 3
    out_channels: int = 1
    depth: int = 12
    token_dim: int = 384
    heads: int = 6
    mlp_ratio: int = 4
    cond_dim: int = 5

    def __post_init__(self):
        if self.img_size % self.patch_size != 0:
            raise ValueError("img_size must be divisible by patch_size")
        if self.token_dim % self.heads != 0:
            raise ValueError("token_dim must be divisible by heads")
        if self.token_dim % 4 != 0:
            raise ValueError("token_dim must be divisible by 4 "
                             "(2D sin/cos positional table)")
        for field_ in ("img_size", "patch_size", "depth", "token_dim",
                       "heads", "mlp_ratio", "cond_dim"):
            if getattr(self, field_) < 1:
                raise ValueError(f"{field_} must be positive")

    @property
    def grid(self) -> int:
        return self.img_size // self.patch_size

    @property
    def num_tokens(self) -> int:
        return self.grid * self.grid

    def to_dict(self) -> dict:
        return asdict(self)


def config_for(size: str, patch_size: int, img_size: int = 64) -> DiTConfig:
    if size not in MODEL_SIZES:
        raise ValueError(f"unknown model size {size!r}; "
                         f"choose from {sorted(MODEL_SIZES)}")
    depth, dim, heads = MODEL_SIZES[size]
    return DiTConfig(img_size=img_size, patch_size=patch_size,
                     depth=depth, token_dim=dim, heads=heads)


def model_name(size: str, patch_size: int) -> str:
    return f"DiT-{SIZE_LETTER[size]}-{patch_size}"


def patchify(x: torch.Tensor, p: int) -> torch.Tensor:
    """(B, C, H, W) -> (B, N, p*p*C) tokens, patches row-major over the
    grid, each token flattened channel-major."""
    B, C, H, W = x.shape
    if H % p or W % p:
        raise ValueError("image size must be divisible by the patch size")
    gh, gw = H // p, W // p
    x = x.reshape(B, C, gh, p, gw, p)
    x = x.permute(0, 2, 4, 1, 3, 5)
    return x.reshape(B, gh * gw, C * p * p)


def unpatchify(tokens: torch.Tensor, p: int, channels: int, H: int,
               W: int) -> torch.Tensor:
    """Exact inverse of patchify."""
    B, N, D = tokens.shape
    gh, gw = H // p, W // p
    if N != gh * gw or D != channels * p * p:
        raise ValueError("token grid does not match the target image")
    x = tokens.reshape(B, gh, gw, channels, p, p)
    x = x.permute(0, 3, 1, 4, 2, 5)
    return x.reshape(B, channels, H, W)


def timestep_embedding(t: torch.Tensor, dim: int,
                       max_period: float = 10000.0) -> torch.Tensor:
    """Standard sinusoidal features for integer timesteps, (B, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(max_period)
                      * torch.arange(half, dtype=torch.float64) / half)
    args = t.double()[:, None] * freqs[None]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[:, :1])], dim=-1)
    return emb


def posemb_sincos_2d(gh: int, gw: int, dim: int) -> torch.Tensor:
    """Fixed 2D sin/cos positional table, (gh*gw, dim), float64."""
    if dim % 4:
        raise ValueError("dim must be divisible by 4")
    quarter = dim // 4
    omega = 1.0 / 10000.0 ** (torch.arange(quarter, dtype=torch.float64) / quarter)
    ys, xs = torch.meshgrid(torch.arange(gh, dtype=torch.float64),
                            torch.arange(gw, dtype=torch.float64),
                            indexing="ij")
    xs = xs.reshape(-1)[:, None] * omega[None]
    ys = ys.reshape(-1)[:, None] * omega[None]
    return torch.cat([torch.sin(xs), torch.cos(xs),
                      torch.sin(ys), torch.cos(ys)], dim=1)


class Attention(nn.Module):
    """Multi-head scaled dot-product self-attention with separate
    query/key/value/output projections."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.wq = nn.Linear(dim, dim)
        self.wk = nn.Linear(dim, dim)
        self.wv = nn.Linear(dim, dim)
        self.wo = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        B, N, D = x.shape
        h, dh = self.heads, self.head_dim

        def split(y):
            return y.reshape(B, N, h, dh).transpose(1, 2)   # B h N dh

        q, k, v = split(self.wq(x)), split(self.wk(x)), split(self.wv(x))
        att = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(dh), dim=-1)
        out = (att @ v).transpose(1, 2).reshape(B, N, D)
        return self.wo(out)


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class DiTBlock(nn.Module):
    """Pre-LN transformer block with adaptive modulation.

    The modulation MLP emits (alpha1, beta1, gamma1, alpha2, beta2,
    gamma2); gamma scales and beta shifts the normalized tokens, alpha
    gates the residual branch.
    """

    def __init__(self, dim: int, heads: int, mlp_ratio: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, elementwise_affine=False, eps=1e-6)
        self.attn = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim, elementwise_affine=False, eps=1e-6)
        self.mlp = Mlp(dim, mlp_ratio * dim)
        self.modulation = nn.Sequential(nn.SiLU(), nn.Linear(dim, 6 * dim))

    def forward(self, x: torch.Tensor, emb: torch.Tensor) -> torch.Tensor:
        a1, b1, g1, a2, b2, g2 = (
            m.unsqueeze(1) for m in self.modulation(emb).chunk(6, dim=1))
        x = x + a1 * self.attn(g1 * self.norm1(x) + b1)
        x = x + a2 * self.mlp(g2 * self.norm2(x) + b2)
        return x


class FinalLayer(nn.Module):
    def __init__(self, dim: int, patch_size: int, out_channels: int):
        super().__init__()
        self.norm = nn.LayerNorm(dim, elementwise_affine=False, eps=1e-6)
        self.modulation = nn.Sequential(nn.SiLU(), nn.Linear(dim, 2 * dim))
        self.linear = nn.Linear(dim, patch_size * patch_size * out_channels)

    def forward(self, x: torch.Tensor, emb: torch.Tensor) -> torch.Tensor:
        g, b = (m.unsqueeze(1) for m in self.modulation(emb).chunk(2, dim=1))
        return self.linear(g * self.norm(x) + b)


class DiT(nn.Module):
    TIME_FEATURES = 256

    def __init__(self, cfg: DiTConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.token_dim
        self.patch_embed = nn.Linear(cfg.patch_size ** 2 * cfg.in_channels, d)
        pos = posemb_sincos_2d(cfg.grid, cfg.grid, d).to(torch.float32)
        self.register_buffer("pos_embed", pos.unsqueeze(0), persistent=False)
        self.time_embed = nn.Sequential(
            nn.Linear(self.TIME_FEATURES, d), nn.SiLU(), nn.Linear(d, d))
        self.cond_embed = nn.Sequential(
            nn.Linear(cfg.cond_dim, d), nn.SiLU(), nn.Linear(d, d))
        self.blocks = nn.ModuleList(
            DiTBlock(d, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.depth))
        self.final = FinalLayer(d, cfg.patch_size, cfg.out_channels)
        self._init_weights()

    def _init_weights(self):
        # adaLN-Zero: modulation outputs start at zero so every block (and
        # the final layer's token path) is gated off; the final bias starts
        # at zero so the initial prediction is exactly zero
        for block in self.blocks:
            nn.init.zeros_(block.modulation[1].weight)
            nn.init.zeros_(block.modulation[1].bias)
        nn.init.zeros_(self.final.modulation[1].weight)
        nn.init.zeros_(self.final.modulation[1].bias)
        nn.init.zeros_(self.final.linear.bias)

    def conditioning_embedding(self, t: torch.Tensor,
                               c: torch.Tensor) -> torch.Tensor:
        dtype = self.patch_embed.weight.dtype
        tf = timestep_embedding(t, self.TIME_FEATURES).to(dtype)
        return self.time_embed(tf) + self.cond_embed(c.to(dtype))

    def forward(self, noisy_topo: torch.Tensor, stress: torch.Tensor,
                strain: torch.Tensor, t: torch.Tensor,
                c: torch.Tensor) -> torch.Tensor:
        cfg = self.cfg
        for name, field_ in (("topology", noisy_topo), ("stress", stress),
                             ("strain", strain)):
            if field_.shape[-2:] != (cfg.img_size, cfg.img_size):
                raise ValueError(f"{name} grid {tuple(field_.shape[-2:])} does "
                                 f"not match the model's {cfg.img_size} size")
        x = torch.cat([noisy_topo, stress, strain], dim=1)
        tokens = self.patch_embed(patchify(x, cfg.patch_size)) + self.pos_embed
        emb = self.conditioning_embedding(t, c)
        for i, block in enumerate(self.blocks):
            tokens = block(tokens, emb)
            if not torch.isfinite(tokens).all():
                raise RuntimeError(f"non-finite activations after block {i}")
        out = self.final(tokens, emb)
        if not torch.isfinite(out).all():
            raise RuntimeError("non-finite activations in the final layer")
        return unpatchify(out, cfg.patch_size, cfg.out_channels,
                          cfg.img_size, cfg.img_size)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())
