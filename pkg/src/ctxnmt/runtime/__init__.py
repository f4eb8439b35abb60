from .checkpoint import (
    Checkpoint,
    CheckpointError,
    CheckpointIntegrityError,
    CheckpointShapeError,
    CheckpointVersionError,
    VocabularyMismatchError,
    load_checkpoint,
    save_checkpoint,
)
from .config import ConfigError, RunConfig
from .models import build_model, from_checkpoint, restore_optimizer, to_checkpoint

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "CheckpointIntegrityError",
    "CheckpointShapeError",
    "CheckpointVersionError",
    "ConfigError",
    "RunConfig",
    "VocabularyMismatchError",
    "build_model",
    "from_checkpoint",
    "load_checkpoint",
    "restore_optimizer",
    "save_checkpoint",
    "to_checkpoint",
]
