from .model import (
    MODEL_SIZES,
    PATCH_SIZES,
    DiT,
    DiTConfig,
    config_for,
    model_name,
    patchify,
    unpatchify,
)
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .train import TrainConfig, TrainingError, diffusion_loss, load_training_data, train
from .sampling import EpsOracle, ModelDenoiser, sample, sample_batch

__all__ = [
    "MODEL_SIZES", "PATCH_SIZES", "DiT", "DiTConfig", "config_for",
    "model_name", "patchify", "unpatchify", "Checkpoint", "CheckpointError",
    "load_checkpoint", "save_checkpoint", "TrainConfig", "TrainingError",
    "diffusion_loss", "load_training_data", "train", "EpsOracle",
    "ModelDenoiser", "sample", "sample_batch",
]
