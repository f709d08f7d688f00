"""Built-in invariant suite for the selfcheck command.

Every check runs on synthetic images generated in-process and returns a
verdict plus a short detail string. The verdicts are invariant claims, so
they do not depend on the configured seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .config import RunConfig
from .densemap import reconstruct
from .embedding import EmbedConfig, EmbedMode, PatchEmbedder
from .imageio import Image
from .packing import pack, unpack
from .quadtree import PatchAssignment, PatchPolicyConfig, assign_patches, token_count
from .scoring import ScorerConfig
from .toyvit import ToyEncoder, ToyViTConfig, pool


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def to_json_obj(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def run_all(cfg: RunConfig) -> list[CheckResult]:
    rng = np.random.default_rng(1234)
    return [
        check_partition(rng),
        check_monotonicity(rng),
        check_zero_init(rng, cfg.seed),
        check_packing_equivalence(rng, cfg.seed),
        check_densemap_cover(rng),
        check_gradients(cfg.seed),
    ]


def _mixed_image(rng: np.random.Generator, w: int, h: int, channels: int = 3) -> Image:
    """Random image with both flat and noisy areas so all scales appear."""
    data = np.full((h, w, channels), rng.uniform(0.2, 0.8), dtype=np.float32)
    for _ in range(rng.integers(1, 4)):
        x0, y0 = rng.integers(0, w), rng.integers(0, h)
        x1, y1 = rng.integers(x0 + 1, w + 1), rng.integers(y0 + 1, h + 1)
        data[y0:y1, x0:x1] = rng.random((y1 - y0, x1 - x0, channels), dtype=np.float32)
    return Image(data)


def verify_partition(assignment: PatchAssignment) -> list[str]:
    """Exact cover, quadtree alignment, and nesting; returns violation notes."""
    problems = []
    p = assignment.base_patch
    writes = np.zeros((assignment.grid_h, assignment.grid_w), dtype=np.int32)
    for c in assignment.cells:
        side = p << c.scale
        if c.x % side or c.y % side:
            problems.append(f"cell {c} not aligned to its side {side}")
        if c.x + side > assignment.image_w or c.y + side > assignment.image_h:
            problems.append(f"cell {c} out of bounds")
            continue
        writes[c.y // p : (c.y + side) // p, c.x // p : (c.x + side) // p] += 1
    if (writes > 1).any():
        problems.append(f"{int((writes > 1).sum())} base cells covered more than once")
    if (writes == 0).any():
        problems.append(f"{int((writes == 0).sum())} base cells left uncovered")
    return problems


def check_partition(rng: np.random.Generator) -> CheckResult:
    problems = []
    cases = 0
    for p in (8, 16):
        for num_scales in (1, 2, 3):
            for _ in range(4):
                gw = int(rng.integers(2, 9))
                gh = int(rng.integers(2, 9))
                img = _mixed_image(rng, gw * p, gh * p)
                taus = tuple(float(rng.uniform(-1.0, 8.5)) for _ in range(num_scales - 1))
                cfg = PatchPolicyConfig(base_patch=p, num_scales=num_scales, thresholds=taus)
                problems += verify_partition(assign_patches(img, cfg))
                cases += 1
    return CheckResult("partition", not problems, f"{cases} assignments, {len(problems)} violations")


def check_monotonicity(rng: np.random.Generator) -> CheckResult:
    grid = [-1.0, 2.0, 4.5, 5.5, 7.0]
    bad = 0
    for _ in range(8):
        img = _mixed_image(rng, 64, 64)
        counts = []
        for tau in grid:
            cfg = PatchPolicyConfig(base_patch=16, num_scales=2, thresholds=(tau,))
            counts.append(token_count(assign_patches(img, cfg)))
        if any(b > a for a, b in zip(counts, counts[1:])):
            bad += 1
    return CheckResult("threshold_monotonicity", bad == 0, f"8 images x {len(grid)} thresholds, {bad} violations")


def check_zero_init(rng: np.random.Generator, seed: int) -> CheckResult:
    policy = PatchPolicyConfig(base_patch=16, num_scales=2, thresholds=(5.5,))
    base_cfg = dict(d_embed=64, base_patch=16, channels=3, num_scales=2, seed=seed, grid_h=4, grid_w=4)
    adaptive = PatchEmbedder(EmbedConfig(mode=EmbedMode.ADAPTIVE, **base_cfg))
    resize_only = PatchEmbedder(EmbedConfig(mode=EmbedMode.RESIZE_ONLY, **base_cfg))
    encoder = ToyEncoder(ToyViTConfig(depth=2, heads=4, d_embed=64, seed=seed))
    worst = 0.0
    ok = True
    with torch.no_grad():
        for _ in range(5):
            img = _mixed_image(rng, 64, 64)
            asg = assign_patches(img, policy)
            a = adaptive.embed_image(img, asg)
            b = resize_only.embed_image(img, asg)
            if not torch.equal(a.tokens, b.tokens):
                ok = False
            pa = pool(unpack(pack([a]), encoder(pack([a])))[0])
            pb = pool(unpack(pack([b]), encoder(pack([b])))[0])
            rel = float((pa - pb).abs().max() / pb.abs().max().clamp_min(1e-12))
            worst = max(worst, rel)
            if rel > 1e-6:
                ok = False
    return CheckResult("zero_init_equivalence", ok, f"5 images, max pooled rel err {worst:.2e}")


def check_packing_equivalence(rng: np.random.Generator, seed: int) -> CheckResult:
    policy = PatchPolicyConfig(base_patch=8, num_scales=2, thresholds=(5.5,))
    embed_cfg = EmbedConfig(d_embed=32, base_patch=8, channels=3, num_scales=2, seed=seed, grid_h=4, grid_w=4)
    embedder = PatchEmbedder(embed_cfg)
    encoder = ToyEncoder(ToyViTConfig(depth=2, heads=4, d_embed=32, seed=seed))
    worst = 0.0
    with torch.no_grad():
        for _ in range(4):
            n = int(rng.integers(2, 5))
            seqs = []
            for i in range(n):
                img = _mixed_image(rng, 32, 32)
                seqs.append(embedder.embed_image(img, assign_patches(img, policy), source=str(i)))
            batch = pack(seqs)
            packed_out = unpack(batch, encoder(batch))
            for seq, got in zip(seqs, packed_out):
                single = pack([seq])
                want = encoder(single)
                rel = float((got - want).abs().max() / want.abs().max().clamp_min(1e-12))
                worst = max(worst, rel)
    return CheckResult("packing_equivalence", worst <= 1e-5, f"4 batches, max rel err {worst:.2e}")


def check_densemap_cover(rng: np.random.Generator) -> CheckResult:
    bad = 0
    for _ in range(10):
        gw = int(rng.integers(2, 7)) * 2
        img = _mixed_image(rng, gw * 8, gw * 8)
        cfg = PatchPolicyConfig(base_patch=8, num_scales=2, thresholds=(float(rng.uniform(0, 8.5)),))
        asg = assign_patches(img, cfg)
        tokens = np.arange(len(asg.cells), dtype=np.float32)[:, None]
        fmap = reconstruct(tokens, asg)  # raises if any base cell missed/doubled
        for i, c in enumerate(asg.cells):
            step = 1 << c.scale
            gy, gx = c.y // 8, c.x // 8
            block = fmap.features[gy : gy + step, gx : gx + step, 0]
            if not (block == i).all():
                bad += 1
    return CheckResult("densemap_cover", bad == 0, f"10 assignments, {bad} bad footprints")


def check_gradients(seed: int) -> CheckResult:
    torch.manual_seed(seed)
    rng = np.random.default_rng(99)
    img = _mixed_image(rng, 16, 16)
    policy = PatchPolicyConfig(base_patch=4, num_scales=2, thresholds=(5.0,))
    asg = assign_patches(img, policy)

    embed_cfg = EmbedConfig(d_embed=16, base_patch=4, channels=3, num_scales=2, seed=seed, grid_h=4, grid_w=4)
    embedder = PatchEmbedder(embed_cfg, dtype=torch.float64)
    with torch.no_grad():  # nonzero combiner so conv-stage gradients flow
        embedder.zero_mlp.weight.uniform_(-0.3, 0.3)
        embedder.zero_mlp.bias.uniform_(-0.3, 0.3)
    err_e = _max_grad_error(lambda: embedder.embed_image(img, asg).tokens.sum(), embedder)

    encoder = ToyEncoder(ToyViTConfig(depth=2, heads=2, d_embed=16, seed=seed), dtype=torch.float64)
    tokens = torch.randn(7, 16, dtype=torch.float64, generator=torch.Generator().manual_seed(7))
    from .embedding import TokenSequence

    batch = pack([TokenSequence(tokens[:3], ()), TokenSequence(tokens[3:], ())])
    err_v = _max_grad_error(lambda: pool(encoder(batch)).sum(), encoder)

    worst = max(err_e, err_v)
    return CheckResult("gradient_check", worst <= 1e-3, f"max rel grad err {worst:.2e}")


def _max_grad_error(loss_fn, module: torch.nn.Module, step: float = 1e-4, samples: int = 24) -> float:
    """Central finite differences vs autograd on a sampled parameter subset."""
    for p in module.parameters():
        p.grad = None
    loss = loss_fn()
    loss.backward()
    rng = np.random.default_rng(0)
    worst = 0.0
    with torch.no_grad():
        for p in module.parameters():
            flat = p.view(-1)
            grad = p.grad.view(-1)
            n = flat.numel()
            idx = rng.choice(n, size=min(samples, n), replace=False)
            for i in idx:
                orig = flat[i].item()
                flat[i] = orig + step
                hi = loss_fn().item()
                flat[i] = orig - step
                lo = loss_fn().item()
                flat[i] = orig
                fd = (hi - lo) / (2 * step)
                an = grad[i].item()
                denom = max(abs(fd), abs(an), 1e-8)
                worst = max(worst, abs(fd - an) / denom)
    return worst
