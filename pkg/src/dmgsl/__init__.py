"""DMGSL: self-supervised structure learning for dynamic heterogeneous graphs."""

__version__ = "0.1.0"

from .autodiff import Tape, Tensor  # noqa: F401
from .config import TrainConfig, parse_config  # noqa: F401
from .data import SnapshotSequence, generate_synthetic, load_dataset  # noqa: F401
from .trainer import TrainResult, ablate, train  # noqa: F401
