"""Variable-length sequence packing and window partitioning.

Token sequences are concatenated into one matrix; the block-diagonal
attention contract is carried implicitly by the cumulative offsets
(attention is allowed iff two token indices fall in the same
[offsets[i], offsets[i+1]) interval). No dense mask is ever materialized
and no padding tokens exist.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
from torch import Tensor

from .errors import (
    DimensionMismatchError,
    EmptyBatchError,
    IndivisibleWindowError,
    ShapeMismatchError,
)
from .embedding import TokenSequence
from .quadtree import Cell, PatchAssignment


@dataclass(frozen=True)
class PackedBatch:
    """Concatenated token sequences with per-image boundary offsets."""

    tokens: Tensor  # (total, d_embed)
    offsets: tuple[int, ...]  # length n_images + 1, starts at 0, strictly increasing
    meta: tuple[Cell, ...]
    sources: tuple[str, ...]

    @property
    def n_images(self) -> int:
        return len(self.offsets) - 1

    @property
    def total_tokens(self) -> int:
        return self.offsets[-1]

    def block_intervals(self) -> tuple[tuple[int, int], ...]:
        return tuple(zip(self.offsets[:-1], self.offsets[1:]))

    def same_block(self, i: int, j: int) -> bool:
        """Attention-mask predicate: may token i attend to token j?"""
        for a, b in self.block_intervals():
            if a <= i < b:
                return a <= j < b
        raise IndexError(f"token index {i} out of range")


def pack(seqs: Sequence[TokenSequence]) -> PackedBatch:
    """Concatenate sequences in order; offsets carry the block boundaries."""
    if len(seqs) == 0:
        raise EmptyBatchError("pack needs at least one token sequence")
    d = seqs[0].tokens.shape[1]
    offsets = [0]
    for i, s in enumerate(seqs):
        if s.tokens.ndim != 2 or s.tokens.shape[1] != d:
            raise DimensionMismatchError(
                f"sequence {i} has embed dim {tuple(s.tokens.shape)}, expected (*, {d})"
            )
        if s.tokens.shape[0] == 0:
            raise EmptyBatchError(f"sequence {i} is empty")
        offsets.append(offsets[-1] + s.tokens.shape[0])
    tokens = torch.cat([s.tokens for s in seqs], dim=0)
    meta = tuple(c for s in seqs for c in s.meta)
    sources = tuple(s.source for s in seqs)
    return PackedBatch(tokens, tuple(offsets), meta, sources)


def unpack(batch: PackedBatch, outputs: Tensor) -> list[Tensor]:
    """Slice a (total, d) output matrix back into per-image matrices."""
    if outputs.shape[0] != batch.total_tokens:
        raise ShapeMismatchError(
            f"outputs have {outputs.shape[0]} rows, batch has {batch.total_tokens} tokens"
        )
    return [outputs[a:b] for a, b in batch.block_intervals()]


@dataclass(frozen=True)
class WindowPartition:
    """Token indices grouped by the spatial window containing each cell."""

    window_side: int
    groups: tuple[tuple[int, ...], ...]


def partition_windows(assignment: PatchAssignment, window_side: int) -> WindowPartition:
    """Assign each cell to the window holding its top-left corner.

    The window side must be a multiple of the largest patch size present and
    must divide both image sides, so quadtree alignment guarantees each cell
    sits entirely inside one window (checked at runtime).
    """
    p = assignment.base_patch
    max_side = p << max((c.scale for c in assignment.cells), default=0)
    if window_side < 1 or window_side % max_side:
        raise IndivisibleWindowError(
            f"window side {window_side} not a multiple of largest patch size {max_side}"
        )
    if assignment.image_w % window_side or assignment.image_h % window_side:
        raise IndivisibleWindowError(
            f"image {assignment.image_w}x{assignment.image_h} not divisible by "
            f"window side {window_side}"
        )
    nwx = assignment.image_w // window_side
    nwy = assignment.image_h // window_side
    groups: list[list[int]] = [[] for _ in range(nwx * nwy)]
    for i, c in enumerate(assignment.cells):
        wx, wy = c.x // window_side, c.y // window_side
        side = assignment.cell_side(c)
        assert c.x + side <= (wx + 1) * window_side and c.y + side <= (wy + 1) * window_side, (
            f"cell {c} straddles a window boundary"
        )
        groups[wy * nwx + wx].append(i)
    return WindowPartition(window_side, tuple(tuple(g) for g in groups))
