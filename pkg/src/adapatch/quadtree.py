"""Hierarchical patch-size assignment.

Scans candidate squares coarse-to-fine on a quadtree-aligned grid and
retains a square at scale s whenever its score is strictly below the
per-scale threshold; everything left over tiles with base-size patches.
The result is an exact, non-overlapping tiling of the image.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import IndivisibleImageError
from .imageio import Image, to_grayscale
from .scoring import ScorerConfig, score_region


class Cell(NamedTuple):
    """Square region with side 2**scale * base_patch at a grid-aligned origin."""

    x: int
    y: int
    scale: int


@dataclass(frozen=True)
class PatchPolicyConfig:
    base_patch: int = 16
    num_scales: int = 3
    # Per-scale retention thresholds, coarsest (s = num_scales - 1) first.
    thresholds: tuple[float, ...] = (5.5, 4.0)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)

    def __post_init__(self) -> None:
        if self.base_patch < 1:
            raise ValueError(f"base_patch must be >= 1, got {self.base_patch}")
        if self.num_scales < 1:
            raise ValueError(f"num_scales must be >= 1, got {self.num_scales}")
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if len(self.thresholds) != self.num_scales - 1:
            raise ValueError(
                f"thresholds must have num_scales - 1 = {self.num_scales - 1} "
                f"entries, got {len(self.thresholds)}"
            )

    def threshold_for(self, scale: int) -> float:
        return self.thresholds[self.num_scales - 1 - scale]

    def patch_side(self, scale: int) -> int:
        return self.base_patch << scale


@dataclass(frozen=True)
class PatchAssignment:
    """Exact tiling of an image by scale-labelled cells, in row-major scan order."""

    image_w: int
    image_h: int
    base_patch: int
    cells: tuple[Cell, ...]

    @property
    def grid_w(self) -> int:
        return self.image_w // self.base_patch

    @property
    def grid_h(self) -> int:
        return self.image_h // self.base_patch

    def cell_side(self, cell: Cell) -> int:
        return self.base_patch << cell.scale

    def __iter__(self) -> Iterator[Cell]:
        return iter(self.cells)

    def to_json_obj(self) -> dict:
        return {
            "w": self.image_w,
            "h": self.image_h,
            "p": self.base_patch,
            "cells": [{"x": c.x, "y": c.y, "s": c.scale} for c in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PatchAssignment":
        cells = tuple(Cell(c["x"], c["y"], c["s"]) for c in obj["cells"])
        return cls(obj["w"], obj["h"], obj["p"], cells)

    @classmethod
    def from_json(cls, text: str) -> "PatchAssignment":
        return cls.from_json_obj(json.loads(text))


def assign_patches(img: Image, cfg: PatchPolicyConfig) -> PatchAssignment:
    """Tile the image with the largest patches whose score clears the thresholds.

    Scales are visited coarsest-first; within a scale, candidates are scanned
    row-major. A candidate square is retained iff no coarser cell already
    claimed it and its score is strictly below the scale's threshold. The
    image sides must be multiples of the base patch; coarse squares are only
    considered where they fit entirely inside the image.
    """
    p = cfg.base_patch
    w, h = img.width, img.height
    if w % p or h % p:
        raise IndivisibleImageError(
            f"image {w}x{h} not divisible by base patch {p}"
        )
    gray = to_grayscale(img).data[:, :, 0]
    gw, gh = w // p, h // p
    claimed = np.zeros((gh, gw), dtype=bool)
    cells: list[Cell] = []

    for s in range(cfg.num_scales - 1, 0, -1):
        side = p << s
        step = 1 << s
        tau = cfg.threshold_for(s)
        for y in range(0, h - side + 1, side):
            for x in range(0, w - side + 1, side):
                gy, gx = y // p, x // p
                if claimed[gy : gy + step, gx : gx + step].any():
                    continue
                score = score_region(gray[y : y + side, x : x + side], cfg.scorer, s)
                if score < tau:
                    cells.append(Cell(x, y, s))
                    claimed[gy : gy + step, gx : gx + step] = True

    for gy in range(gh):
        for gx in range(gw):
            if not claimed[gy, gx]:
                cells.append(Cell(gx * p, gy * p, 0))

    cells.sort(key=lambda c: (c.y, c.x))
    return PatchAssignment(w, h, p, tuple(cells))


def token_count(assignment: PatchAssignment) -> int:
    """Number of tokens the assignment produces (one per cell)."""
    return len(assignment.cells)


def base_token_count(assignment: PatchAssignment) -> int:
    """Token count of the uniform base-patch tiling of the same image."""
    return assignment.grid_w * assignment.grid_h
