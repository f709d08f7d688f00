"""Rectangular feature-map reconstruction from variable-scale tokens.

Each scale-s token is broadcast into the 2^s x 2^s block of base-grid cells
its patch covers (4^s copies), recovering a dense (grid_h, grid_w, d) map
that downstream dense-prediction heads can consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import blob
from .errors import CountMismatchError
from .quadtree import PatchAssignment


@dataclass(frozen=True)
class FeatureMap:
    """Base-grid feature map: (grid_h, grid_w, d_embed)."""

    features: np.ndarray

    @property
    def grid_h(self) -> int:
        return self.features.shape[0]

    @property
    def grid_w(self) -> int:
        return self.features.shape[1]

    def dump(self, path) -> None:
        blob.write_blob(path, {"features": self.features})


def reconstruct(tokens, assignment: PatchAssignment) -> FeatureMap:
    """Paint each token into its cell's footprint on the base grid.

    `tokens` is an (n_cells, d) array (torch tensors accepted) ordered like
    the assignment's cells; every base-grid cell is written exactly once.
    """
    if hasattr(tokens, "detach"):
        tokens = tokens.detach().cpu().numpy()
    arr = np.asarray(tokens)
    if arr.ndim != 2 or arr.shape[0] != len(assignment.cells):
        raise CountMismatchError(
            f"got {arr.shape[0] if arr.ndim == 2 else 'non-matrix'} tokens "
            f"for {len(assignment.cells)} cells"
        )
    p = assignment.base_patch
    gh, gw = assignment.grid_h, assignment.grid_w
    out = np.empty((gh, gw, arr.shape[1]), dtype=arr.dtype)
    writes = np.zeros((gh, gw), dtype=np.int32)
    for cell, vec in zip(assignment.cells, arr):
        step = 1 << cell.scale
        gy, gx = cell.y // p, cell.x // p
        out[gy : gy + step, gx : gx + step] = vec
        writes[gy : gy + step, gx : gx + step] += 1
    assert (writes == 1).all(), "assignment does not cover the base grid exactly once"
    return FeatureMap(out)
