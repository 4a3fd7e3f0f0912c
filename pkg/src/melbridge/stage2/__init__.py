"""Learned post-processing of Stage-1 output."""

from .network import (AdaptiveConvBlock, AdaptiveLinear, ConditionedUNet, channel_plan,
                      film_apply, l1_loss, unet_forward)
from .training import (PreparedSet, TrainingConfig, TrainingResult, adamw_step, lr_schedule,
                       prepare_training_set, train, write_training_log)
from .weights import load_weights, model_from_bytes, model_to_bytes, save_weights

__all__ = [
    "AdaptiveConvBlock", "AdaptiveLinear", "ConditionedUNet", "PreparedSet", "TrainingConfig",
    "TrainingResult", "adamw_step", "channel_plan", "film_apply", "l1_loss", "load_weights",
    "lr_schedule", "model_from_bytes", "model_to_bytes", "prepare_training_set", "save_weights",
    "train", "unet_forward", "write_training_log",
]
