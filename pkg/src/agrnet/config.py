"""Flat key=value configuration with CLI overrides."""

import dataclasses
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    # data
    data_dir: str = ""          # empty -> generate synthetic samples in memory
    train_size: int = 256
    val_size: int = 64
    image_size: int = 96
    # model
    num_classes: int = 11
    backbone_channels: tuple = (16, 32, 64, 64)
    graph_channels: int = 64
    graph_k: int = 4
    projection_scale: bool = False   # optional 1/sqrt(C) scale on similarity logits
    use_edge: bool = True
    use_graph: bool = True
    spatial_pool: bool = False
    # loss
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    lambda4: float = 0.5
    lambda5: float = 0.1
    delta: float = 1.0
    loss_eps: float = 1e-7
    # optimizer
    lr: float = 0.001
    momentum: float = 0.0
    weight_decay: float = 0.0005
    lr_schedule: str = "constant"    # "constant" | "poly"
    poly_power: float = 0.9
    # training
    batch_size: int = 4
    steps: int = 2000
    seed: int = 0
    ckpt_every: int = 500
    augment: bool = True
    out_dir: str = "runs/default"

    def __post_init__(self):
        if isinstance(self.backbone_channels, list):
            self.backbone_channels = tuple(self.backbone_channels)
        if self.image_size % 8 != 0:
            raise ConfigError("image.size must be a multiple of 8")
        for key in ("train_size", "val_size", "num_classes", "graph_channels",
                    "graph_k", "batch_size", "steps"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive")
        for key in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be nonnegative")
        if self.delta <= 0:
            raise ConfigError("loss.delta must be positive")
        if self.lr_schedule not in ("constant", "poly"):
            raise ConfigError(f"unknown lr schedule {self.lr_schedule!r}")


# dotted config-file key -> dataclass field
KEYMAP = {
    "data.dir": "data_dir",
    "data.train": "train_size",
    "data.val": "val_size",
    "image.size": "image_size",
    "model.classes": "num_classes",
    "backbone.channels": "backbone_channels",
    "graph.channels": "graph_channels",
    "graph.k": "graph_k",
    "graph.projection_scale": "projection_scale",
    "model.use_edge": "use_edge",
    "model.use_graph": "use_graph",
    "model.spatial_pool": "spatial_pool",
    "loss.lambda1": "lambda1",
    "loss.lambda2": "lambda2",
    "loss.lambda3": "lambda3",
    "loss.lambda4": "lambda4",
    "loss.lambda5": "lambda5",
    "loss.delta": "delta",
    "loss.eps": "loss_eps",
    "optim.lr": "lr",
    "optim.momentum": "momentum",
    "optim.weight_decay": "weight_decay",
    "optim.schedule": "lr_schedule",
    "optim.poly_power": "poly_power",
    "train.batch": "batch_size",
    "train.steps": "steps",
    "train.seed": "seed",
    "train.ckpt_every": "ckpt_every",
    "train.augment": "augment",
    "out.dir": "out_dir",
}

FIELDMAP = {v: k for k, v in KEYMAP.items()}
_FIELDS = {f.name: f for f in dataclasses.fields(Config)}


def _parse_value(field_name: str, raw: str):
    f = _FIELDS[field_name]
    raw = raw.strip()
    if f.type in ("bool", bool) or isinstance(f.default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse {raw!r} as bool for {field_name}")
    if isinstance(f.default, int) and not isinstance(f.default, bool):
        return int(raw)
    if isinstance(f.default, float):
        return float(raw)
    if isinstance(f.default, tuple):
        return tuple(int(x) for x in raw.split(",") if x.strip())
    return raw


def parse_assignments(pairs) -> dict:
    """Parse ['graph.k=4', ...] into a field->value dict."""
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if key not in KEYMAP:
            raise ConfigError(f"unknown config key {key!r}")
        name = KEYMAP[key]
        out[name] = _parse_value(name, raw)
    return out


def load_config(path: str | None, overrides=()) -> Config:
    """Read a flat key=value file (optional), then apply override pairs."""
    values = {}
    if path is not None:
        with open(path) as fh:
            lines = []
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if line:
                    lines.append(line)
        values.update(parse_assignments(lines))
    values.update(parse_assignments(overrides))
    return Config(**values)


def config_items(cfg: Config):
    """Dotted (key, string-value) pairs, serialization order fixed by KEYMAP."""
    for key, name in KEYMAP.items():
        value = getattr(cfg, name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        yield key, str(value)
