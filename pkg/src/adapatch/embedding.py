"""Token embedding for variable-size patches.

Every cell becomes one d_embed token. Base-scale cells go straight through
the shared linear patch embedding E. Coarser cells take two routes that are
summed: E applied to the cell resized down to the base patch size, plus a
correction built by embedding all base-size sub-patches, collapsing them
spatially with stride-2 conv stages, and passing the result through a
linear layer initialized to exactly zero. At initialization the correction
path therefore contributes nothing and the embedding reduces to the
resize-only form.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from enum import Enum

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from . import blob
from .errors import CellOutOfBoundsError, DimensionMismatchError
from .imageio import Image, resize_bilinear
from .quadtree import Cell, PatchAssignment


class EmbedMode(str, Enum):
    ADAPTIVE = "apt"  # resize route + zero-initialized multi-scale correction
    RESIZE_ONLY = "resize"  # resize route only
    RANDOM_DROP = "random"  # base tiling with a count-matched random drop


@dataclass(frozen=True)
class EmbedConfig:
    d_embed: int = 192
    base_patch: int = 16
    channels: int = 3
    num_scales: int = 3
    mode: EmbedMode = EmbedMode.ADAPTIVE
    seed: int = 0
    # Reference base-patch grid of the learned position table; images with a
    # different grid get a bilinearly resampled table.
    grid_h: int = 14
    grid_w: int = 14

    def __post_init__(self) -> None:
        if self.d_embed < 1:
            raise ValueError(f"d_embed must be >= 1, got {self.d_embed}")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.num_scales < 1:
            raise ValueError(f"num_scales must be >= 1, got {self.num_scales}")
        if self.grid_h < 1 or self.grid_w < 1:
            raise ValueError("position grid must be at least 1x1")


@dataclass
class TokenSequence:
    """Per-image embedded tokens plus per-token cell metadata."""

    tokens: Tensor  # (n, d_embed)
    meta: tuple[Cell, ...]
    source: str = ""

    def __len__(self) -> int:
        return self.tokens.shape[0]


class PatchEmbedder(nn.Module):
    """Shared patch embedding with the zero-initialized multi-scale correction.

    Parameters are drawn from uniform(-k, k), k = 1/sqrt(fan_in), using a
    generator seeded from the config, so equal seeds give bit-identical
    parameters. The correction combiner (`zero_mlp`) starts at exactly zero.
    """

    def __init__(self, cfg: EmbedConfig, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.cfg = cfg
        p, c, d = cfg.base_patch, cfg.channels, cfg.d_embed
        self.patch_linear = nn.Linear(p * p * c, d, dtype=dtype)
        self.conv_stages = nn.ModuleList(
            nn.Conv2d(d, d, kernel_size=2, stride=2, groups=d, dtype=dtype)
            for _ in range(cfg.num_scales - 1)
        )
        self.zero_mlp = nn.Linear(d, d, dtype=dtype)
        self.pos_embed = nn.Parameter(torch.empty(cfg.grid_h, cfg.grid_w, d, dtype=dtype))
        self.reset_parameters()

    @property
    def dtype(self) -> torch.dtype:
        return self.patch_linear.weight.dtype

    @torch.no_grad()
    def reset_parameters(self) -> None:
        gen = torch.Generator().manual_seed(self.cfg.seed)

        def seeded_uniform(t: Tensor, fan_in: int) -> None:
            k = 1.0 / math.sqrt(fan_in)
            # Sample in float32 regardless of module dtype so float32 and
            # float64 builds of the same seed carry identical values.
            sample = torch.empty(t.shape, dtype=torch.float32).uniform_(-k, k, generator=gen)
            t.copy_(sample.to(t.dtype))

        fan = self.patch_linear.in_features
        seeded_uniform(self.patch_linear.weight, fan)
        seeded_uniform(self.patch_linear.bias, fan)
        for conv in self.conv_stages:
            fan = 4  # depthwise: in_channels/groups * kernel area
            seeded_uniform(conv.weight, fan)
            seeded_uniform(conv.bias, fan)
        seeded_uniform(self.pos_embed, self.cfg.d_embed)
        self.zero_mlp.weight.zero_()
        self.zero_mlp.bias.zero_()

    # -- core routes ---------------------------------------------------------

    def embed_patch(self, patch: np.ndarray) -> Tensor:
        """Apply the shared embedding E to one base-size (p, p, c) patch."""
        cfg = self.cfg
        if patch.shape != (cfg.base_patch, cfg.base_patch, cfg.channels):
            raise DimensionMismatchError(
                f"expected ({cfg.base_patch}, {cfg.base_patch}, {cfg.channels}) patch, "
                f"got {patch.shape}"
            )
        v = torch.from_numpy(np.ascontiguousarray(patch, dtype=np.float32))
        return self.patch_linear(v.to(self.dtype).reshape(-1))

    def embed_cell(self, img: Image, cell: Cell) -> Tensor:
        """Embed one cell, position term included."""
        self._check_image(img)
        pos = self._pos_table(img.height // self.cfg.base_patch, img.width // self.cfg.base_patch)
        return self._cell_token(img, cell, pos)

    def embed_image(self, img: Image, assignment: PatchAssignment, source: str = "") -> TokenSequence:
        """Embed every cell of the assignment in scan order.

        RANDOM_DROP mode ignores the assignment's cell shapes: it tiles at
        the base scale and keeps a random subset of the same total count,
        seeded from (config seed, source id).
        """
        self._check_image(img)
        if (assignment.image_w, assignment.image_h) != (img.width, img.height):
            raise DimensionMismatchError(
                f"assignment is {assignment.image_w}x{assignment.image_h}, "
                f"image is {img.width}x{img.height}"
            )
        pos = self._pos_table(assignment.grid_h, assignment.grid_w)
        if self.cfg.mode is EmbedMode.RANDOM_DROP:
            cells = self._random_keep_cells(assignment, source)
        else:
            cells = assignment.cells
        tokens = torch.stack([self._cell_token(img, cell, pos) for cell in cells])
        return TokenSequence(tokens, tuple(cells), source)

    # -- internals -----------------------------------------------------------

    def _check_image(self, img: Image) -> None:
        if img.channels != self.cfg.channels:
            raise DimensionMismatchError(
                f"embedder configured for {self.cfg.channels} channels, "
                f"image has {img.channels}"
            )

    def _cell_token(self, img: Image, cell: Cell, pos_table: Tensor) -> Tensor:
        cfg = self.cfg
        p = cfg.base_patch
        if cell.scale < 0 or cell.scale >= cfg.num_scales:
            raise CellOutOfBoundsError(f"cell scale {cell.scale} outside [0, {cfg.num_scales})")
        side = p << cell.scale
        if cell.x < 0 or cell.y < 0 or cell.x + side > img.width or cell.y + side > img.height:
            raise CellOutOfBoundsError(f"cell {cell} with side {side} exceeds image bounds")

        region = img.data[cell.y : cell.y + side, cell.x : cell.x + side, :]
        if cell.scale == 0:
            tok = self.embed_patch(region)
        else:
            resized = resize_bilinear(Image(np.ascontiguousarray(region)), p, p)
            tok = self.embed_patch(resized.data)
            if cfg.mode is EmbedMode.ADAPTIVE:
                tok = self._correction(region, cell.scale) + tok

        step = 1 << cell.scale
        gy, gx = cell.y // p, cell.x // p
        pos = pos_table[gy : gy + step, gx : gx + step].reshape(-1, cfg.d_embed).mean(dim=0)
        return tok + pos

    def _correction(self, region: np.ndarray, scale: int) -> Tensor:
        """Embed the 4**scale sub-patches, collapse spatially, combine via zero_mlp."""
        p, d = self.cfg.base_patch, self.cfg.d_embed
        n = 1 << scale
        subs = [
            self.embed_patch(region[i * p : (i + 1) * p, j * p : (j + 1) * p, :])
            for i in range(n)
            for j in range(n)
        ]
        grid = torch.stack(subs).reshape(n, n, d).permute(2, 0, 1).unsqueeze(0)
        for stage in self.conv_stages[:scale]:
            grid = stage(grid)
        return self.zero_mlp(grid.reshape(d))

    def _pos_table(self, grid_h: int, grid_w: int) -> Tensor:
        if (grid_h, grid_w) == (self.cfg.grid_h, self.cfg.grid_w):
            return self.pos_embed
        t = self.pos_embed.permute(2, 0, 1).unsqueeze(0)
        t = F.interpolate(t, size=(grid_h, grid_w), mode="bilinear", align_corners=False)
        return t.squeeze(0).permute(1, 2, 0)

    def _random_keep_cells(self, assignment: PatchAssignment, source: str) -> tuple[Cell, ...]:
        p = assignment.base_patch
        base = [
            Cell(gx * p, gy * p, 0)
            for gy in range(assignment.grid_h)
            for gx in range(assignment.grid_w)
        ]
        keep = len(assignment.cells)
        seq = np.random.SeedSequence([self.cfg.seed & 0x7FFFFFFF, zlib.crc32(source.encode())])
        rng = np.random.default_rng(seq)
        idx = np.sort(rng.choice(len(base), size=keep, replace=False))
        return tuple(base[i] for i in idx)

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        tensors = {name: t.detach().cpu().numpy() for name, t in self.state_dict().items()}
        blob.write_blob(path, tensors)

    def load(self, path) -> None:
        tensors = blob.read_blob(path)
        state = {name: torch.from_numpy(arr).to(self.dtype) for name, arr in tensors.items()}
        self.load_state_dict(state)


def init_params(cfg: EmbedConfig, dtype: torch.dtype = torch.float32) -> PatchEmbedder:
    """Build a freshly initialized embedder for the config."""
    return PatchEmbedder(cfg, dtype=dtype)
