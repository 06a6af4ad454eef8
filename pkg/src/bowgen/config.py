"""Project configuration: one YAML file, overridable from the command line.

Schema (all keys optional)::

    data: path            # dataset root (prepare) or prepared directory (train/generate/evaluate)
    out: path             # output directory
    seed: 0
    fold: 0               # leave-one-piece-out fold index used by `train`
    segment_len: 900
    val_fraction: 0.2
    workers: 4
    model: {d_model: 512, n_heads: 4, ...}      # ModelConfig fields
    train: {warmup: 500, k: 1.0, batch_size: 32, ...}  # TrainConfig fields
    synth: {n_pieces: 8, duration: 30.0, ...}   # SyntheticSpec fields
"""
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .exceptions import InvalidInput
from .model import ModelConfig
from .synth import SyntheticSpec
from .training import TrainConfig


@dataclass
class ProjectConfig:
    data: str | None = None
    out: str | None = None
    seed: int = 0
    fold: int = 0
    segment_len: int = 900
    val_fraction: float = 0.2
    workers: int = 4
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)

    def model_config(self):
        return ModelConfig.from_dict({"segment_len": self.segment_len, **self.model})

    def train_config(self):
        return TrainConfig.from_dict({"seed": self.seed, "val_fraction": self.val_fraction,
                                      **self.train})

    def synth_spec(self):
        return SyntheticSpec(**{"seed": self.seed, **self.synth})

    def to_dict(self):
        return asdict(self)

    def dump(self, path):
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path=None):
        if path is None:
            return cls()
        p = Path(path)
        if not p.exists():
            raise InvalidInput(f"config file {p} does not exist")
        return cls.from_dict(yaml.safe_load(p.read_text()) or {})

    def override(self, **values):
        """Set top-level fields; ``None`` values are ignored. Dotted keys reach into sections."""
        for key, value in values.items():
            if value is None:
                continue
            if "." in key:
                section, name = key.split(".", 1)
                getattr(self, section)[name] = value
            else:
                setattr(self, key, value)
        return self

    def require_path(self, attr):
        value = getattr(self, attr)
        if value is None:
            raise InvalidInput(f"'{attr}' is not set (config file or --{attr})")
        if not Path(value).exists():
            raise InvalidInput(f"{attr} path {value} does not exist")
        return Path(value)
