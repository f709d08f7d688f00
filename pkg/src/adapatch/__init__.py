"""adapatch: content-aware adaptive patch tokenization for ViT-style encoders.

Pipeline: score image regions for compressibility, tile each image with the
largest patches that stay under per-scale thresholds (quadtree-aligned),
embed every patch into a shared token space with a zero-initialized
multi-scale correction, pack the variable-length sequences into one batch
under a block-diagonal attention contract, and run a small deterministic
transformer encoder for end-to-end checks.
"""

from .config import RunConfig
from .densemap import FeatureMap, reconstruct
from .embedding import EmbedConfig, EmbedMode, PatchEmbedder, TokenSequence, init_params
from .errors import AdapatchError
from .imageio import Image, load_image, resize_bilinear, to_grayscale
from .packing import PackedBatch, WindowPartition, pack, partition_windows, unpack
from .quadtree import (
    Cell,
    PatchAssignment,
    PatchPolicyConfig,
    assign_patches,
    base_token_count,
    token_count,
)
from .scoring import RegionScore, ScorerConfig, ScorerKind, entropy, laplacian_score, upsampling_score
from .toyvit import ToyEncoder, ToyViTConfig, estimate_flops, pool

__version__ = "0.1.0"

__all__ = [
    "AdapatchError",
    "Cell",
    "EmbedConfig",
    "EmbedMode",
    "FeatureMap",
    "Image",
    "PackedBatch",
    "PatchAssignment",
    "PatchEmbedder",
    "PatchPolicyConfig",
    "RegionScore",
    "RunConfig",
    "ScorerConfig",
    "ScorerKind",
    "TokenSequence",
    "ToyEncoder",
    "ToyViTConfig",
    "WindowPartition",
    "assign_patches",
    "base_token_count",
    "entropy",
    "estimate_flops",
    "init_params",
    "laplacian_score",
    "load_image",
    "pack",
    "partition_windows",
    "pool",
    "reconstruct",
    "resize_bilinear",
    "to_grayscale",
    "token_count",
    "unpack",
    "upsampling_score",
]
