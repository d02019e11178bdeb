"""Training configuration: defaults, flat key=value files, canonical hashing."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass
class TrainConfig:
    epochs: int = 500
    lr: float = 1e-2
    optimizer: str = "adam"  # or "sgd"
    tau: float = 0.99
    bootstrap_every: int = 10
    k: int = 2
    r_anchor: float = 0.4  # anchor-view feature mask rate
    r_learned: float = 0.8  # learned-view feature mask rate
    r_edge: float = 0.25  # edge drop rate, both views
    temperature: float = 0.5
    hat_hidden: int = 64
    head_dim: int = 32
    n_heads: int = 4
    encoder_dim: int = 32
    projector_dim: int = 16
    seed: int = 0
    use_hat: bool = True
    use_tat: bool = True
    hat_node_average: bool = False  # pool attention scores over nodes

    def validate(self) -> "TrainConfig":
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must be in [0, 1], got {self.tau}")
        if self.bootstrap_every < 1:
            raise ConfigError(f"bootstrap_every must be >= 1, got {self.bootstrap_every}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        for name in ("r_anchor", "r_learned", "r_edge"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        for name in ("hat_hidden", "head_dim", "n_heads", "encoder_dim", "projector_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        return self


_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def _parse_value(key: str, raw: str):
    ftype = _FIELDS[key].type
    if ftype == "bool" or ftype is bool:
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if ftype == "int" or ftype is int:
            return int(raw)
        if ftype == "float" or ftype is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}")
    return raw


def parse_config(path) -> TrainConfig:
    """Flat key=value file, one key per line, '#' starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return TrainConfig(**values).validate()


def format_config(cfg: TrainConfig) -> str:
    lines = []
    for f in dataclasses.fields(TrainConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name}={v}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: TrainConfig) -> str:
    """Identity of the training trajectory.

    The epoch count is a stopping point, not a trajectory change, and is
    excluded so a checkpoint can resume toward a larger epoch target.
    """
    lines = [ln for ln in format_config(cfg).splitlines() if not ln.startswith("epochs=")]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()[:16]
