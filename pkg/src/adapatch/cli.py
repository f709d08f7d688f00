"""Command-line interface: patchify, visualize, bench, forward, selfcheck.

Configuration comes from an optional flat key = value file (--config) with
flag overrides on top; every command is deterministic given its config and
inputs, timing fields aside. JSON goes to stdout (or --out), log notices to
stderr. Exit codes: 0 success, 1 selfcheck failures, 2 config/input errors
(including partial bench failures).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import torch
from PIL import Image as PILImage

from . import blob, selfcheck
from .bench import compare_scorers, run_bench, sweep_thresholds
from .config import RunConfig
from .errors import AdapatchError, ConfigError
from .pipeline import (
    build_embedder,
    build_encoder,
    ensure_rgb,
    forward_pooled,
    load_prepared,
)
from .quadtree import assign_patches, base_token_count, token_count

_log = logging.getLogger(__name__)

# Border color per scale (fine to coarse); cycles if more scales appear.
SCALE_PALETTE = (
    (230, 60, 50),
    (60, 200, 90),
    (70, 110, 255),
    (250, 220, 60),
    (200, 80, 220),
)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="deterministic seed override")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--tau", metavar="LIST", help="comma-separated thresholds, coarsest first")
    common.add_argument("--scorer", choices=("entropy", "laplacian", "upsampling"))
    common.add_argument("--mode", choices=("apt", "resize", "random"))
    common.add_argument("--window", type=int, metavar="N", help="window side for windowed attention")

    parser = argparse.ArgumentParser(
        prog="adapatch",
        description="Content-aware adaptive patch tokenization toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("patchify", parents=[common], help="emit patch assignment JSON + stats")
    p.add_argument("image")

    v = sub.add_parser("visualize", parents=[common], help="write a PNG overlay of the assignment")
    v.add_argument("image")

    b = sub.add_parser("bench", parents=[common], help="benchmark a directory of images")
    b.add_argument("directory")
    b.add_argument("--repeats", type=int, default=3, help="timing repeats per image")
    b.add_argument("--sweep", metavar="LIST", help="comma-separated threshold sweep grid")
    b.add_argument(
        "--compare-scorers",
        action="store_true",
        help="benchmark all scorers at a matched retained-token fraction",
    )

    f = sub.add_parser("forward", parents=[common], help="pooled features for a batch of images")
    f.add_argument("images", nargs="+")

    sub.add_parser("selfcheck", parents=[common], help="run the built-in invariant suite")
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        "seed": args.seed,
        "thresholds": args.tau,
        "scorer": args.scorer,
        "mode": args.mode,
        "window": args.window,
    }
    cfg = cfg.with_overrides({k: v for k, v in overrides.items() if v is not None})
    cfg.validate()
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_patchify(cfg: RunConfig, image_path: str, out: str | None) -> int:
    img = load_prepared(image_path, cfg.base_patch)
    assignment = assign_patches(img, cfg.policy_config())
    base = base_token_count(assignment)
    apt = token_count(assignment)
    obj = {
        "assignment": assignment.to_json_obj(),
        "stats": {
            "base_tokens": base,
            "apt_tokens": apt,
            "reduction_ratio": 1.0 - apt / base,
        },
        "config": cfg.to_dict(),
    }
    _emit(json.dumps(obj, indent=2) + "\n", out)
    return 0


def render_overlay(img_data: np.ndarray, assignment) -> np.ndarray:
    """Stroke 1-px cell borders (color per scale) onto a uint8 RGB copy."""
    rgb = np.rint(img_data * 255.0).astype(np.uint8)
    if rgb.shape[2] == 1:
        rgb = np.repeat(rgb, 3, axis=2)
    rgb = rgb.copy()
    p = assignment.base_patch
    for cell in assignment.cells:
        side = p << cell.scale
        color = SCALE_PALETTE[cell.scale % len(SCALE_PALETTE)]
        x0, y0, x1, y1 = cell.x, cell.y, cell.x + side - 1, cell.y + side - 1
        rgb[y0, x0 : x1 + 1] = color
        rgb[y1, x0 : x1 + 1] = color
        rgb[y0 : y1 + 1, x0] = color
        rgb[y0 : y1 + 1, x1] = color
    return rgb


def cmd_visualize(cfg: RunConfig, image_path: str, out: str | None) -> int:
    if not out:
        raise ConfigError("out: visualize requires --out PATH for the overlay PNG")
    img = load_prepared(image_path, cfg.base_patch)
    assignment = assign_patches(img, cfg.policy_config())
    overlay = render_overlay(img.data, assignment)
    PILImage.fromarray(overlay, mode="RGB").save(out, format="PNG")
    _log.info("wrote overlay %s (%d cells)", out, len(assignment.cells))
    return 0


def cmd_forward(cfg: RunConfig, image_paths: list[str], out: str | None) -> int:
    out = out or "pooled.bin"
    embedder = build_embedder(cfg)
    encoder = build_encoder(cfg)
    seqs, assignments = [], []
    with torch.no_grad():
        for path in image_paths:
            img = ensure_rgb(load_prepared(path, cfg.base_patch))
            assignment = assign_patches(img, cfg.policy_config())
            seqs.append(embedder.embed_image(img, assignment, source=str(path)))
            assignments.append(assignment)
        pooled = forward_pooled(seqs, assignments, cfg, encoder)
    tensors = {
        f"pooled/{i:04d}_{Path(path).name}": vec.detach().cpu().numpy()
        for i, (path, vec) in enumerate(zip(image_paths, pooled))
    }
    blob.write_blob(out, tensors)
    _log.info("wrote %d pooled vectors to %s", len(tensors), out)
    return 0


def cmd_bench(cfg: RunConfig, args: argparse.Namespace) -> int:
    if args.compare_scorers:
        result = compare_scorers(args.directory, cfg, repeats=args.repeats)
        obj = {
            "target_fraction": result["target_fraction"],
            "scorers": {
                kind: {
                    "thresholds": info["thresholds"],
                    "scale": info["scale"],
                    "fraction": info["fraction"],
                    "report": info["report"].to_json_obj(),
                }
                for kind, info in result["scorers"].items()
            },
        }
        _emit(json.dumps(obj, indent=2) + "\n", args.out)
        return 0
    if args.sweep:
        grid = [float(t) for t in args.sweep.split(",") if t.strip() != ""]
        reports = sweep_thresholds(args.directory, cfg, grid, repeats=args.repeats)
        obj = [r.to_json_obj() for r in reports]
        _emit(json.dumps(obj, indent=2) + "\n", args.out)
        return 2 if any(r.errors for r in reports) else 0
    report = run_bench(args.directory, cfg, repeats=args.repeats)
    _emit(json.dumps(report.to_json_obj(), indent=2) + "\n", args.out)
    return 2 if report.errors else 0


def cmd_selfcheck(cfg: RunConfig, out: str | None) -> int:
    results = selfcheck.run_all(cfg)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}", file=sys.stderr)
    passed = all(r.passed for r in results)
    obj = {"passed": passed, "checks": [r.to_json_obj() for r in results]}
    _emit(json.dumps(obj, indent=2) + "\n", out)
    return 0 if passed else 1


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args)
        if args.command == "patchify":
            return cmd_patchify(cfg, args.image, args.out)
        if args.command == "visualize":
            return cmd_visualize(cfg, args.image, args.out)
        if args.command == "bench":
            return cmd_bench(cfg, args)
        if args.command == "forward":
            return cmd_forward(cfg, args.images, args.out)
        return cmd_selfcheck(cfg, args.out)
    except (AdapatchError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
