"""Run configuration: typed keys, plain-text key=value files, presets.

Config files hold one ``key=value`` pair per line; blank lines and lines
starting with ``#`` are ignored. Unknown keys are errors. A ``preset``
key (``toy`` or ``fullscale``) rewrites the defaults before the remaining
keys apply, so a file can start from a preset and override a few values.

The ``fullscale`` preset carries the reference large-scale settings
(ViT-B/16 geometry, 30 epochs, lr 1e-5, weight decay 2e-4, cosine
schedule floor 1e-8); the ``toy`` preset is the desk-scale configuration
every test and example runs on. The raw file text is preserved so checkpoints can embed
the configuration verbatim.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

from .errors import ConfigError
from .frames import RepresentationConfig
from .losses import LossWeights

PRESETS = ("toy", "fullscale")


@dataclass
class RunConfig:
    preset: str = "toy"
    data_dir: str = "data"
    out_dir: str = "runs/out"
    seed: int = 0

    # stream-to-frame representation
    events_total: int = 512
    events_per_frame: int = 128
    target_resolution: int = 32

    # event/image encoder geometry
    embed_dim: int = 64
    output_dim: int = 64
    layers: int = 4
    heads: int = 4
    patch_size: int = 8
    n_event_prompts: int = 4
    per_frame_prompts: bool = False
    use_event_prompts: bool = True
    use_temporal_modeling: bool = True

    # text encoder
    n_text_prompts: int = 16
    text_layers: int = 2
    text_heads: int = 4
    max_text_len: int = 32
    use_content_prompts: bool = True
    separate_content_mlps: bool = False

    # objective
    alpha: float = 1.0
    beta: float = 1.0
    theta: float = 1.0
    gamma: float = 1.0
    symmetric_contrastive: bool = False
    init_temperature: float = 0.07

    # optimization
    lr: float = 1e-3
    weight_decay: float = 2e-4
    min_lr: float = 1e-8
    epochs: int = 200
    batch_size: int = 16
    distinct_category_batches: bool = True
    few_shot_k: int = 0
    no_image: bool = False
    dtype: str = "float64"
    threads: int = 1
    eval_every: int = 5
    early_stop_train_acc: float = 0.0
    early_stop_val_acc: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {PRESETS}")
        for name in ("events_total", "events_per_frame", "target_resolution",
                     "embed_dim", "output_dim", "layers", "heads", "patch_size",
                     "text_layers", "text_heads", "max_text_len", "epochs",
                     "batch_size", "eval_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("n_event_prompts", "n_text_prompts", "few_shot_k", "threads", "seed"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("lr", "weight_decay", "min_lr", "early_stop_train_acc",
                     "early_stop_val_acc"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.init_temperature <= 0:
            raise ConfigError("init_temperature must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.events_total % self.events_per_frame != 0:
            raise ConfigError(
                f"events_total ({self.events_total}) must be divisible by "
                f"events_per_frame ({self.events_per_frame})")
        if self.target_resolution % self.patch_size != 0:
            raise ConfigError(
                f"target_resolution ({self.target_resolution}) must be divisible "
                f"by patch_size ({self.patch_size})")
        # weight sanity; LossWeights re-validates non-negativity
        LossWeights(self.alpha, self.beta, self.theta, self.gamma)

    @property
    def frame_count(self) -> int:
        return self.events_total // self.events_per_frame

    def representation(self) -> RepresentationConfig:
        return RepresentationConfig(
            total_events=self.events_total,
            events_per_frame=self.events_per_frame,
            target_resolution=self.target_resolution)

    def loss_weights(self) -> LossWeights:
        if self.no_image:
            return LossWeights.image_absent()
        return LossWeights(self.alpha, self.beta, self.theta, self.gamma)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"


def fullscale_preset_overrides() -> dict:
    """Reference large-scale settings (ViT-B/16 backbone geometry)."""
    return dict(
        preset="fullscale",
        events_total=1800000, events_per_frame=150000, target_resolution=224,
        embed_dim=768, output_dim=512, layers=12, heads=12, patch_size=16,
        n_event_prompts=16, n_text_prompts=16, text_layers=12, text_heads=8,
        max_text_len=77,
        lr=1e-5, weight_decay=2e-4, min_lr=1e-8, epochs=30, batch_size=16,
        dtype="float32", threads=0,
    )


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    f = _FIELDS[name]
    raw = raw.strip()
    if f.type in ("bool", bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name} expects a boolean, got {raw!r}")
    try:
        if f.type in ("int", int):
            return int(raw)
        if f.type in ("float", float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name} expects a {f.type}, got {raw!r}") from None
    return raw


def parse_config_text(text: str) -> RunConfig:
    """Parse key=value lines into a validated RunConfig."""
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = _coerce(key, raw)

    values = {}
    if pairs.get("preset", "toy") == "fullscale":
        values.update(fullscale_preset_overrides())
    values.update(pairs)
    return RunConfig(**values)


def load_config(path) -> tuple[RunConfig, str]:
    """Read a config file; returns the config and the verbatim file text."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as f:
        text = f.read()
    return parse_config_text(text), text
