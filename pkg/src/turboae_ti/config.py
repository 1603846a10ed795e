"""Experiment configuration: a nested, human-editable file (YAML; JSON is
accepted too) that round-trips losslessly and hashes stably, so every
artifact can be traced back to the exact configuration that produced it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import yaml

from .channels import ChannelParams, ChannelError
from .codec import CodecConfig
from .training import TrainingConfig, TrainingError

RATE = 1.0 / 3.0


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    block_len: int = 40
    rate: float = RATE
    arch: CodecConfig = field(default_factory=CodecConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    eval_channel: ChannelParams = field(default_factory=ChannelParams)
    eval_snr_db: list[float] = field(default_factory=lambda: [-2.0, -1.0, 0.0, 1.0, 2.0])
    eval_min_errors: int = 100
    eval_max_blocks: int = 100_000
    seed: int = 0
    out_dir: str = "runs"

    def __post_init__(self):
        if isinstance(self.arch, dict):
            self.arch = CodecConfig(**self.arch)
        if isinstance(self.training, dict):
            try:
                self.training = TrainingConfig(**self.training)
            except (TypeError, TrainingError, ChannelError) as exc:
                raise ConfigError(f"training: {exc}") from exc
        if isinstance(self.eval_channel, dict):
            try:
                self.eval_channel = ChannelParams(**self.eval_channel)
            except (TypeError, ChannelError) as exc:
                raise ConfigError(f"eval_channel: {exc}") from exc
        self.validate()

    def validate(self) -> None:
        if self.block_len <= 0:
            raise ConfigError("block_len: must be positive")
        if abs(self.rate - RATE) > 1e-12:
            raise ConfigError("rate: fixed at 1/3")
        if self.arch.block_len != self.block_len:
            raise ConfigError("arch.block_len: must equal block_len")
        if self.training.penalty_weight < 0:
            raise ConfigError("training.penalty_weight: must be >= 0")
        if not self.eval_snr_db:
            raise ConfigError("eval_snr_db: grid must be non-empty")
        if self.eval_min_errors <= 0 or self.eval_max_blocks <= 0:
            raise ConfigError("eval_min_errors/eval_max_blocks: must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["arch"] = self.arch.to_dict()
        d["training"] = self.training.to_dict()
        d["eval_channel"] = self.eval_channel.to_dict()
        d["eval_snr_db"] = [float(v) for v in self.eval_snr_db]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return ExperimentConfig.from_dict(data)


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    path = Path(path)
    d = config.to_dict()
    if path.suffix == ".json":
        path.write_text(json.dumps(d, indent=2))
    else:
        path.write_text(yaml.safe_dump(d, sort_keys=False))
