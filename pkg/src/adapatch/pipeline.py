"""End-to-end plumbing shared by the CLI and the benchmark harness.

Covers the full path: load -> resize to a base-patch multiple -> assign
patch sizes -> embed -> pack -> encode -> unpack -> pool. Window mode packs
each spatial window as its own attention block instead of whole images;
pooling still happens per image.
"""

from __future__ import annotations

import logging

import numpy as np
import torch
from torch import Tensor

from .config import RunConfig
from .embedding import PatchEmbedder, TokenSequence
from .imageio import Image, load_image, resize_bilinear
from .packing import pack, partition_windows, unpack
from .quadtree import PatchAssignment, assign_patches
from .toyvit import ToyEncoder, pool

_log = logging.getLogger(__name__)


def nearest_patch_multiple(size: int, p: int) -> int:
    return max(p, round(size / p) * p)


def prepare_image(img: Image, p: int, name: str = "<image>") -> Image:
    """Resize to the nearest base-patch multiple (no-op when already aligned)."""
    out_w = nearest_patch_multiple(img.width, p)
    out_h = nearest_patch_multiple(img.height, p)
    if (out_w, out_h) == (img.width, img.height):
        return img
    _log.info(
        "%s: resizing %dx%d -> %dx%d (nearest multiple of patch %d)",
        name, img.width, img.height, out_w, out_h, p,
    )
    return resize_bilinear(img, out_w, out_h)


def load_prepared(path, p: int) -> Image:
    return prepare_image(load_image(path), p, name=str(path))


def ensure_rgb(img: Image) -> Image:
    """Expand grayscale to 3 channels so one embedder serves mixed corpora."""
    if img.channels == 3:
        return img
    return Image(np.repeat(img.data, 3, axis=2))


def build_embedder(cfg: RunConfig, channels: int = 3) -> PatchEmbedder:
    return PatchEmbedder(cfg.embed_config(channels=channels))


def build_encoder(cfg: RunConfig) -> ToyEncoder:
    return ToyEncoder(cfg.toyvit_config())


def forward_pooled(
    seqs: list[TokenSequence],
    assignments: list[PatchAssignment],
    cfg: RunConfig,
    encoder: ToyEncoder,
) -> list[Tensor]:
    """Run the encoder over a packed batch and mean-pool per image.

    With a window side configured, each window's tokens form their own
    attention block; the per-image pool still covers all of that image's
    tokens (in original token order).
    """
    if cfg.window is None:
        batch = pack(seqs)
        outputs = encoder(batch)
        return [pool(m) for m in unpack(batch, outputs)]

    blocks: list[TokenSequence] = []
    owner_rows: list[tuple[int, tuple[int, ...]]] = []  # (image idx, token idx per row)
    for i, (seq, asg) in enumerate(zip(seqs, assignments)):
        part = partition_windows(asg, cfg.window)
        for group in part.groups:
            if not group:
                continue
            rows = torch.stack([seq.tokens[j] for j in group])
            blocks.append(TokenSequence(rows, tuple(seq.meta[j] for j in group), seq.source))
            owner_rows.append((i, group))
    batch = pack(blocks)
    outputs = encoder(batch)
    pieces = unpack(batch, outputs)

    pooled: list[Tensor] = []
    for i, seq in enumerate(seqs):
        by_token: dict[int, Tensor] = {}
        for (owner, group), piece in zip(owner_rows, pieces):
            if owner != i:
                continue
            for j, row in zip(group, piece):
                by_token[j] = row
        ordered = torch.stack([by_token[j] for j in sorted(by_token)])
        pooled.append(pool(ordered))
    return pooled
