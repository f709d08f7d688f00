"""Run configuration: one flat key = value file plus flag overrides.

The same RunConfig drives every command; it is validated against the
module preconditions before any work starts and echoes itself into JSON
reports so a run can be reproduced from its output.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .embedding import EmbedConfig, EmbedMode
from .quadtree import PatchPolicyConfig
from .scoring import ScorerConfig, ScorerKind
from .toyvit import ToyViTConfig

_MODE_NAMES = {m.value for m in EmbedMode}
_SCORER_NAMES = {k.value for k in ScorerKind}


@dataclass(frozen=True)
class RunConfig:
    base_patch: int = 16
    num_scales: int = 3
    thresholds: tuple[float, ...] = (5.5, 4.0)
    scorer: str = "entropy"
    bins: int = 256
    d_embed: int = 192
    depth: int = 4
    heads: int = 4
    mlp_ratio: float = 4.0
    mode: str = "apt"
    seed: int = 0
    window: int | None = None
    # Nominal square input resolution; images are resized to the nearest
    # base-patch multiple at the CLI boundary, so this only fixes the
    # reference position-embedding grid.
    image_size: int = 224

    def validate(self) -> None:
        if self.base_patch < 1:
            raise ConfigError(f"base_patch: must be >= 1, got {self.base_patch}")
        if self.num_scales < 1:
            raise ConfigError(f"num_scales: must be >= 1, got {self.num_scales}")
        if len(self.thresholds) != self.num_scales - 1:
            raise ConfigError(
                f"thresholds: expected {self.num_scales - 1} values for "
                f"num_scales={self.num_scales}, got {len(self.thresholds)}"
            )
        if self.scorer not in _SCORER_NAMES:
            raise ConfigError(f"scorer: must be one of {sorted(_SCORER_NAMES)}, got {self.scorer!r}")
        if self.bins < 2:
            raise ConfigError(f"bins: must be >= 2, got {self.bins}")
        if self.d_embed < 1:
            raise ConfigError(f"d_embed: must be >= 1, got {self.d_embed}")
        if self.depth < 0:
            raise ConfigError(f"depth: must be >= 0, got {self.depth}")
        if self.heads < 1 or self.d_embed % self.heads:
            raise ConfigError(
                f"heads: d_embed {self.d_embed} must be divisible by heads {self.heads}"
            )
        if self.mlp_ratio <= 0:
            raise ConfigError(f"mlp_ratio: must be > 0, got {self.mlp_ratio}")
        if self.mode not in _MODE_NAMES:
            raise ConfigError(f"mode: must be one of {sorted(_MODE_NAMES)}, got {self.mode!r}")
        if self.image_size < self.base_patch:
            raise ConfigError(
                f"image_size: must be >= base_patch {self.base_patch}, got {self.image_size}"
            )
        if self.window is not None:
            largest = self.base_patch << (self.num_scales - 1)
            if self.window < 1 or self.window % largest:
                raise ConfigError(
                    f"window: must be a positive multiple of the largest patch "
                    f"size {largest}, got {self.window}"
                )

    # -- derived module configs ------------------------------------------------

    def scorer_config(self) -> ScorerConfig:
        return ScorerConfig(kind=ScorerKind(self.scorer), bins=self.bins)

    def policy_config(self) -> PatchPolicyConfig:
        return PatchPolicyConfig(
            base_patch=self.base_patch,
            num_scales=self.num_scales,
            thresholds=self.thresholds,
            scorer=self.scorer_config(),
        )

    def embed_config(self, channels: int = 3) -> EmbedConfig:
        grid = max(1, self.image_size // self.base_patch)
        return EmbedConfig(
            d_embed=self.d_embed,
            base_patch=self.base_patch,
            channels=channels,
            num_scales=self.num_scales,
            mode=EmbedMode(self.mode),
            seed=self.seed,
            grid_h=grid,
            grid_w=grid,
        )

    def toyvit_config(self) -> ToyViTConfig:
        return ToyViTConfig(
            depth=self.depth,
            heads=self.heads,
            d_embed=self.d_embed,
            mlp_ratio=self.mlp_ratio,
            seed=self.seed,
        )

    # -- (de)serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "base_patch": self.base_patch,
            "num_scales": self.num_scales,
            "thresholds": list(self.thresholds),
            "scorer": self.scorer,
            "bins": self.bins,
            "d_embed": self.d_embed,
            "depth": self.depth,
            "heads": self.heads,
            "mlp_ratio": self.mlp_ratio,
            "mode": self.mode,
            "seed": self.seed,
            "window": self.window,
            "image_size": self.image_size,
        }

    def to_flat_text(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            if value is None:
                continue
            if isinstance(value, list):
                value = ",".join(_fmt_num(v) for v in value)
            elif isinstance(value, float):
                value = _fmt_num(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_flat_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            values[key] = val
        return cls().with_overrides(values, source=source)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        return cls.from_flat_text(path.read_text(), source=str(path))

    def with_overrides(self, values: dict, source: str = "<flags>") -> "RunConfig":
        """Apply string/typed overrides on top of this config; unknown keys fail."""
        known = {f.name for f in fields(self)}
        parsed = {}
        for key, val in values.items():
            if val is None:
                continue
            if key not in known:
                raise ConfigError(f"{source}: unknown config key {key!r}")
            parsed[key] = _coerce(key, val)
        return replace(self, **parsed)


def _fmt_num(v) -> str:
    f = float(v)
    return str(int(f)) if f == int(f) else repr(f)


def _coerce(key: str, val):
    if key == "thresholds":
        if isinstance(val, (list, tuple)):
            return tuple(float(v) for v in val)
        parts = [p for p in str(val).split(",") if p.strip() != ""]
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"thresholds: not a comma-separated number list: {val!r}") from None
    if key in ("scorer", "mode"):
        return str(val)
    if key == "mlp_ratio":
        try:
            return float(val)
        except ValueError:
            raise ConfigError(f"{key}: not a number: {val!r}") from None
    if key == "window":
        if isinstance(val, str) and val.lower() in ("none", ""):
            return None
        try:
            return int(val)
        except (TypeError, ValueError):
            raise ConfigError(f"window: not an integer: {val!r}") from None
    try:
        return int(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: not an integer: {val!r}") from None
