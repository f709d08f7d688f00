"""Corpus benchmarking: token reduction, estimated flops, local throughput.

Token statistics are deterministic; timings are medians over repeats and
measured serially to avoid contention skew. Wall-clock numbers describe
this implementation only, not any GPU/fused-attention setup; the flop
ratio is the analytic estimate at the configured encoder shape.
"""

from __future__ import annotations

import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import RunConfig
from .errors import AdapatchError, NoImagesFoundError
from .imageio import Image
from .packing import pack
from .pipeline import build_embedder, build_encoder, ensure_rgb, forward_pooled, load_prepared
from .quadtree import assign_patches, base_token_count, token_count
from .toyvit import estimate_flops

_WORKER_ENV = "APT_NUM_THREADS"


@dataclass
class ImageStats:
    path: str
    base_tokens: int
    apt_tokens: int
    reduction_ratio: float
    score_time_ms: float = 0.0
    embed_time_ms: float = 0.0
    forward_time_ms: float = 0.0

    def to_json_obj(self) -> dict:
        return {
            "path": self.path,
            "base_tokens": self.base_tokens,
            "apt_tokens": self.apt_tokens,
            "reduction_ratio": self.reduction_ratio,
            "score_time_ms": self.score_time_ms,
            "embed_time_ms": self.embed_time_ms,
            "forward_time_ms": self.forward_time_ms,
        }


@dataclass
class BenchReport:
    images: list[ImageStats]
    aggregate: dict
    config: dict
    errors: list[dict] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "images": [s.to_json_obj() for s in self.images],
            "aggregate": self.aggregate,
            "errors": self.errors,
            "config": self.config,
        }


def worker_count() -> int:
    env = os.environ.get(_WORKER_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def find_images(directory) -> list[Path]:
    directory = Path(directory)
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in (".png", ".ppm"))


def run_bench(directory, cfg: RunConfig, repeats: int = 3) -> BenchReport:
    """Benchmark every decodable image in the directory.

    Per-image decode errors are recorded in the report, not fatal; an empty
    or undecodable directory raises NoImagesFoundError.
    """
    cfg.validate()
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    paths = find_images(directory)
    if not paths:
        raise NoImagesFoundError(f"no .png/.ppm images in {directory}")

    policy = cfg.policy_config()
    loaded: list[tuple[Path, Image]] = []
    errors: list[dict] = []

    def _load(path: Path):
        return path, ensure_rgb(load_prepared(path, cfg.base_patch))

    with ThreadPoolExecutor(max_workers=worker_count()) as pool_:
        for result in pool_.map(lambda p: _try(_load, p), paths):
            if isinstance(result, dict):
                errors.append(result)
            else:
                loaded.append(result)
    if not loaded:
        raise NoImagesFoundError(f"no decodable images in {directory}")

    embedder = build_embedder(cfg)
    encoder = build_encoder(cfg)

    stats: list[ImageStats] = []
    for path, img in loaded:
        assignment = assign_patches(img, policy)
        base = base_token_count(assignment)
        apt = token_count(assignment)
        score_t, embed_t, fwd_t = _time_image(img, assignment, cfg, policy, embedder, encoder, repeats)
        stats.append(
            ImageStats(
                path=str(path),
                base_tokens=base,
                apt_tokens=apt,
                reduction_ratio=1.0 - apt / base,
                score_time_ms=score_t,
                embed_time_ms=embed_t,
                forward_time_ms=fwd_t,
            )
        )

    stats.sort(key=lambda s: s.path)
    return BenchReport(stats, _aggregate(stats, cfg), cfg.to_dict(), errors)


def _try(fn, *args):
    try:
        return fn(*args)
    except (AdapatchError, FileNotFoundError, OSError) as exc:
        return {"path": str(args[0]), "error": f"{type(exc).__name__}: {exc}"}


def _time_image(img, assignment, cfg, policy, embedder, encoder, repeats):
    import torch

    score_times, embed_times, fwd_times = [], [], []
    with torch.no_grad():
        for _ in range(repeats):
            t0 = time.perf_counter()
            assign_patches(img, policy)
            t1 = time.perf_counter()
            seq = embedder.embed_image(img, assignment, source="bench")
            t2 = time.perf_counter()
            forward_pooled([seq], [assignment], cfg, encoder)
            t3 = time.perf_counter()
            score_times.append(t1 - t0)
            embed_times.append(t2 - t1)
            fwd_times.append(t3 - t2)
    ms = lambda xs: statistics.median(xs) * 1000.0
    return ms(score_times), ms(embed_times), ms(fwd_times)


def _aggregate(stats: list[ImageStats], cfg: RunConfig) -> dict:
    reductions = [s.reduction_ratio for s in stats]
    apt_flops = sum(estimate_flops(s.apt_tokens, cfg.depth, cfg.d_embed, cfg.mlp_ratio) for s in stats)
    base_flops = sum(estimate_flops(s.base_tokens, cfg.depth, cfg.d_embed, cfg.mlp_ratio) for s in stats)
    fwd_seconds = sum(s.forward_time_ms for s in stats) / 1000.0
    total_apt = sum(s.apt_tokens for s in stats)
    return {
        "images": len(stats),
        "mean_reduction": statistics.fmean(reductions),
        "median_reduction": statistics.median(reductions),
        "tokens_per_second": (total_apt / fwd_seconds) if fwd_seconds > 0 else 0.0,
        "flop_ratio": apt_flops / base_flops,
        "estimated_flop_reduction": 1.0 - apt_flops / base_flops,
    }


def sweep_thresholds(directory, cfg: RunConfig, tau_grid, repeats: int = 1) -> list[BenchReport]:
    """One report per threshold setting; grid entries may be scalars
    (broadcast to every level) or per-level lists.

    Along ascending consecutive settings, per-image token counts must be
    nonincreasing; that is asserted, not just reported.
    """
    if not tau_grid:
        raise ValueError("tau_grid must be nonempty")
    settings = [_normalize_taus(t, cfg.num_scales) for t in tau_grid]
    reports = [
        run_bench(directory, cfg.with_overrides({"thresholds": taus}), repeats=repeats)
        for taus in settings
    ]
    for (taus_a, rep_a), (taus_b, rep_b) in zip(zip(settings, reports), zip(settings[1:], reports[1:])):
        if all(b >= a for a, b in zip(taus_a, taus_b)):
            counts_a = {s.path: s.apt_tokens for s in rep_a.images}
            for s in rep_b.images:
                assert s.apt_tokens <= counts_a[s.path], (
                    f"token count increased at higher threshold for {s.path}"
                )
    return reports


def _normalize_taus(entry, num_scales: int) -> tuple[float, ...]:
    if isinstance(entry, (int, float)):
        return (float(entry),) * (num_scales - 1)
    taus = tuple(float(t) for t in entry)
    if len(taus) != num_scales - 1:
        raise ValueError(f"grid entry {entry!r} has {len(taus)} values, expected {num_scales - 1}")
    return taus


def mean_retained_fraction(directory, cfg: RunConfig) -> float:
    """Mean apt/base token fraction over the corpus (token statistics only)."""
    cfg.validate()
    paths = find_images(directory)
    if not paths:
        raise NoImagesFoundError(f"no .png/.ppm images in {directory}")
    policy = cfg.policy_config()
    fractions = []
    for path in paths:
        try:
            img = load_prepared(path, cfg.base_patch)
        except (AdapatchError, OSError):
            continue
        assignment = assign_patches(img, policy)
        fractions.append(token_count(assignment) / base_token_count(assignment))
    if not fractions:
        raise NoImagesFoundError(f"no decodable images in {directory}")
    return statistics.fmean(fractions)


def match_token_fraction(directory, cfg: RunConfig, target_fraction: float, iters: int = 20):
    """Bisect a global scale factor on cfg.thresholds until the corpus retains
    roughly the target token fraction. Returns (scale, thresholds, fraction).

    Retained fraction is nonincreasing in the scale factor, so plain
    bisection applies; 20 iterations pin the factor to ~1e-6 of its bracket.
    """
    if cfg.num_scales < 2:
        raise ValueError("matching needs at least one threshold level")

    def fraction_at(alpha: float) -> float:
        taus = tuple(alpha * t for t in cfg.thresholds)
        return mean_retained_fraction(directory, cfg.with_overrides({"thresholds": taus}))

    lo, hi = 0.0, 1.0
    while fraction_at(hi) > target_fraction and hi < 2**20:
        hi *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fraction_at(mid) > target_fraction:
            lo = mid
        else:
            hi = mid
    alpha = 0.5 * (lo + hi)
    taus = tuple(alpha * t for t in cfg.thresholds)
    return alpha, taus, fraction_at(alpha)


def compare_scorers(directory, cfg: RunConfig, repeats: int = 1, iters: int = 20) -> dict:
    """Benchmark all scorers at (approximately) the same retained-token fraction.

    The configured scorer runs at the configured thresholds and sets the
    target fraction; the other scorers get their thresholds fitted by
    bisection on a global scale factor.
    """
    reference = run_bench(directory, cfg, repeats=repeats)
    target = 1.0 - reference.aggregate["mean_reduction"]
    results = {
        cfg.scorer: {
            "thresholds": list(cfg.thresholds),
            "scale": 1.0,
            "fraction": target,
            "report": reference,
        }
    }
    for kind in ("entropy", "laplacian", "upsampling"):
        if kind == cfg.scorer:
            continue
        scorer_cfg = cfg.with_overrides({"scorer": kind})
        alpha, taus, fraction = match_token_fraction(directory, scorer_cfg, target, iters=iters)
        fitted = scorer_cfg.with_overrides({"thresholds": taus})
        results[kind] = {
            "thresholds": list(taus),
            "scale": alpha,
            "fraction": fraction,
            "report": run_bench(directory, fitted, repeats=repeats),
        }
    return {"target_fraction": target, "scorers": results}
