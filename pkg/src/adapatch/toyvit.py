"""Small deterministic transformer encoder over packed token batches.

Pre-norm blocks (x += MHSA(LN(x)); x += MLP(LN(x))) with a final LayerNorm.
Attention is evaluated independently per packed-block interval, which is the
block-diagonal contract: tokens never attend across image boundaries. No
class token; per-image readout is mean pooling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import Tensor, nn

from .errors import DimensionMismatchError, EmptySequenceError
from .packing import PackedBatch


@dataclass(frozen=True)
class ToyViTConfig:
    depth: int = 4
    heads: int = 4
    d_embed: int = 192
    mlp_ratio: float = 4.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if self.heads < 1 or self.d_embed % self.heads:
            raise ValueError(
                f"d_embed {self.d_embed} must be divisible by heads {self.heads}"
            )


class EncoderBlock(nn.Module):
    def __init__(self, d: int, heads: int, mlp_hidden: int, dtype: torch.dtype):
        super().__init__()
        self.heads = heads
        self.norm1 = nn.LayerNorm(d, dtype=dtype)
        self.qkv = nn.Linear(d, 3 * d, dtype=dtype)
        self.proj = nn.Linear(d, d, dtype=dtype)
        self.norm2 = nn.LayerNorm(d, dtype=dtype)
        self.fc1 = nn.Linear(d, mlp_hidden, dtype=dtype)
        self.fc2 = nn.Linear(mlp_hidden, d, dtype=dtype)
        self.act = nn.GELU()

    def attend(self, x: Tensor) -> Tensor:
        """Full self-attention over one block interval of shape (n, d)."""
        n, d = x.shape
        hd = d // self.heads
        qkv = self.qkv(x).reshape(n, 3, self.heads, hd).permute(1, 2, 0, 3)
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(hd)
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).permute(1, 0, 2).reshape(n, d)
        return self.proj(out)

    def forward(self, x: Tensor, intervals: tuple[tuple[int, int], ...]) -> Tensor:
        h = self.norm1(x)
        x = x + torch.cat([self.attend(h[a:b]) for a, b in intervals], dim=0)
        x = x + self.fc2(self.act(self.fc1(self.norm2(x))))
        return x


class ToyEncoder(nn.Module):
    """Deterministic encoder; equal seeds give bit-identical parameters."""

    def __init__(self, cfg: ToyViTConfig, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.cfg = cfg
        hidden = int(round(cfg.d_embed * cfg.mlp_ratio))
        self.blocks = nn.ModuleList(
            EncoderBlock(cfg.d_embed, cfg.heads, hidden, dtype) for _ in range(cfg.depth)
        )
        self.final_norm = nn.LayerNorm(cfg.d_embed, dtype=dtype)
        self.reset_parameters()

    @property
    def dtype(self) -> torch.dtype:
        return self.final_norm.weight.dtype

    @torch.no_grad()
    def reset_parameters(self) -> None:
        gen = torch.Generator().manual_seed(self.cfg.seed)
        for module in self.modules():
            if isinstance(module, nn.Linear):
                k = 1.0 / math.sqrt(module.in_features)
                for t in (module.weight, module.bias):
                    sample = torch.empty(t.shape, dtype=torch.float32)
                    sample.uniform_(-k, k, generator=gen)
                    t.copy_(sample.to(t.dtype))
            elif isinstance(module, nn.LayerNorm):
                module.weight.fill_(1.0)
                module.bias.zero_()

    def forward(self, batch: PackedBatch) -> Tensor:
        x = batch.tokens
        if x.shape[1] != self.cfg.d_embed:
            raise DimensionMismatchError(
                f"batch embed dim {x.shape[1]} != encoder d_embed {self.cfg.d_embed}"
            )
        x = x.to(self.dtype)
        intervals = batch.block_intervals()
        for block in self.blocks:
            x = block(x, intervals)
        return self.final_norm(x)


def pool(outputs: Tensor) -> Tensor:
    """Mean over tokens of one image's output matrix."""
    if outputs.ndim != 2 or outputs.shape[0] == 0:
        raise EmptySequenceError("pool needs at least one token row")
    return outputs.mean(dim=0)


def estimate_flops(n_tokens: int, depth: int, d_embed: int, mlp_ratio: float = 4.0) -> int:
    """Analytic per-forward flop estimate for an n-token sequence.

    Per layer, in multiply-accumulates: 4*N*d^2 for the q/k/v/out projections,
    2*N^2*d for the attention score and value matmuls, and 2*N*d^2*mlp_ratio
    for the two MLP matmuls. One multiply-accumulate counts as 2 flops.
    """
    if n_tokens < 1:
        raise ValueError(f"n_tokens must be >= 1, got {n_tokens}")
    n, d = n_tokens, d_embed
    macs_per_layer = 4 * n * d * d + 2 * n * n * d + 2 * n * d * d * mlp_ratio
    return int(round(2 * depth * macs_per_layer))
