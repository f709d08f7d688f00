#!/usr/bin/env python3
"""Materialize the bundled 20-image natural-photo mini corpus.

Photographs come from scikit-image's locally bundled sample data (no
download); each is center-cropped square and resized to 224x224 RGB with
the package's own bilinear resampler, then written as PNG. Deterministic:
rerunning produces byte-identical files.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from adapatch.imageio import Image, resize_bilinear

# Local (non-downloading) photographic samples in scikit-image.
CANDIDATES = (
    "astronaut",
    "brick",
    "camera",
    "cell",
    "chelsea",
    "clock",
    "coffee",
    "coins",
    "grass",
    "gravel",
    "hubble_deep_field",
    "immunohistochemistry",
    "microaneurysms",
    "moon",
    "page",
    "rocket",
    "text",
    "retina",
    "eagle",
    "motorcycle_left",
    "motorcycle_right",
)

TARGET = 224
COUNT = 20


def _load_samples() -> list[tuple[str, np.ndarray]]:
    import skimage.data as data

    out = []
    for name in CANDIDATES:
        fetch = getattr(data, name, None)
        if fetch is None:
            continue
        try:
            arr = fetch()
        except Exception:  # needs network / registry miss: skip
            continue
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        if arr.dtype != np.uint8:
            continue
        out.append((name, arr[:, :, :3]))
    return out


def _synthetic(rng: np.random.Generator, idx: int) -> np.ndarray:
    """Photo-like filler: smooth gradients plus textured noise regions."""
    yy, xx = np.mgrid[0:TARGET, 0:TARGET].astype(np.float64) / TARGET
    base = 0.5 + 0.3 * np.sin(2 * np.pi * (0.7 * xx + 0.4 * yy + 0.1 * idx))
    img = np.stack([base, np.roll(base, 31, axis=0), np.roll(base, 57, axis=1)], axis=2)
    for _ in range(4):
        x0, y0 = rng.integers(0, TARGET - 32, size=2)
        w, h = rng.integers(32, 128, size=2)
        patch = rng.random((min(h, TARGET - y0), min(w, TARGET - x0), 3))
        img[y0 : y0 + patch.shape[0], x0 : x0 + patch.shape[1]] = patch
    return np.clip(img * 255, 0, 255).astype(np.uint8)


def _square_224(arr: np.ndarray) -> np.ndarray:
    h, w = arr.shape[:2]
    side = min(h, w)
    y0, x0 = (h - side) // 2, (w - side) // 2
    crop = arr[y0 : y0 + side, x0 : x0 + side]
    img = Image(crop.astype(np.float32) / 255.0)
    resized = resize_bilinear(img, TARGET, TARGET)
    return np.rint(resized.data * 255.0).astype(np.uint8)


def main(out_dir: str = "assets/mini_corpus") -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    samples = _load_samples()
    rng = np.random.default_rng(20240)
    idx = 0
    written = []
    for name, arr in samples[:COUNT]:
        path = out / f"{idx:02d}_{name}.png"
        PILImage.fromarray(_square_224(arr), mode="RGB").save(path, format="PNG")
        written.append(path.name)
        idx += 1
    while idx < COUNT:
        path = out / f"{idx:02d}_synthetic.png"
        PILImage.fromarray(_synthetic(rng, idx), mode="RGB").save(path, format="PNG")
        written.append(path.name)
        idx += 1
    print(f"wrote {len(written)} images to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
