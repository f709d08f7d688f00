"""Per-region compressibility scores.

Three scorers over single-channel regions: Shannon entropy of the binned
intensity histogram (bits), mean absolute Laplacian response, and the mean
squared error left by a down/up resampling round trip. All three return
exactly 0.0 on constant regions; low scores mark regions that a coarse
patch can represent without losing much.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyRegionError, IndivisibleRegionError
from .imageio import Image, resize_bilinear

# Score value in the scorer's units: bits (entropy), mean |response|
# (laplacian), or mean squared error (upsampling).
RegionScore = float


class ScorerKind(str, Enum):
    ENTROPY = "entropy"
    LAPLACIAN = "laplacian"
    UPSAMPLING = "upsampling"


@dataclass(frozen=True)
class ScorerConfig:
    kind: ScorerKind = ScorerKind.ENTROPY
    bins: int = 256  # histogram bins; log base fixed at 2

    def __post_init__(self) -> None:
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2, got {self.bins}")


def entropy(region: np.ndarray, cfg: ScorerConfig | None = None) -> RegionScore:
    """Shannon entropy in bits of the binned intensity histogram.

    Intensities in [0, 1] are binned with floor(v * (bins - 1) + 0.5), which
    recovers the original 8-bit codes for 256 bins; zero-count bins
    contribute nothing.
    """
    cfg = cfg or ScorerConfig()
    region = np.asarray(region)
    if region.size == 0:
        raise EmptyRegionError("entropy of an empty region is undefined")
    idx = np.floor(region.astype(np.float64, copy=False) * (cfg.bins - 1) + 0.5)
    counts = np.bincount(idx.astype(np.int64).ravel(), minlength=cfg.bins)
    p = counts[counts > 0] / region.size
    return float(-(p * np.log2(p)).sum()) + 0.0


def laplacian_score(region: np.ndarray, cfg: ScorerConfig | None = None) -> RegionScore:
    """Mean absolute response of the 4-neighbour Laplacian over interior pixels.

    Regions with a side below 3 have no interior and score 0.
    """
    region = np.asarray(region)
    if region.size == 0:
        raise EmptyRegionError("laplacian of an empty region is undefined")
    if region.ndim != 2 or min(region.shape) < 3:
        return 0.0
    c = region[1:-1, 1:-1]
    # Sum of neighbour differences: exactly zero on constant regions.
    resp = (
        (region[:-2, 1:-1] - c)
        + (region[2:, 1:-1] - c)
        + (region[1:-1, :-2] - c)
        + (region[1:-1, 2:] - c)
    )
    return float(np.abs(resp).mean(dtype=np.float64))


def upsampling_score(region: np.ndarray, scale_index: int) -> RegionScore:
    """Mean squared error after downsampling by 2**scale_index and back up."""
    region = np.asarray(region)
    if region.size == 0:
        raise EmptyRegionError("upsampling score of an empty region is undefined")
    if scale_index < 1:
        raise ValueError(f"scale_index must be >= 1, got {scale_index}")
    h, w = region.shape
    factor = 1 << scale_index
    if h % factor or w % factor:
        raise IndivisibleRegionError(
            f"region {w}x{h} not divisible by 2**{scale_index}"
        )
    img = Image(np.ascontiguousarray(region, dtype=np.float32)[:, :, None])
    down = resize_bilinear(img, w // factor, h // factor)
    up = resize_bilinear(down, w, h)
    diff = up.data[:, :, 0].astype(np.float64) - region.astype(np.float64)
    return float((diff * diff).mean())


def score_region(region: np.ndarray, cfg: ScorerConfig, scale_index: int) -> RegionScore:
    """Dispatch to the configured scorer (scale_index feeds the upsampling one)."""
    if cfg.kind is ScorerKind.ENTROPY:
        return entropy(region, cfg)
    if cfg.kind is ScorerKind.LAPLACIAN:
        return laplacian_score(region, cfg)
    return upsampling_score(region, scale_index)
