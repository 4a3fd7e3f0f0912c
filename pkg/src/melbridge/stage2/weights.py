from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from ..formats import FormatError, weights_from_bytes, weights_to_bytes
from .network import ConditionedUNet

# metadata: n_levels, base_channels, n_mels, cond_dim


def _tensors(model: ConditionedUNet) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()
            if v.is_floating_point()}


def model_to_bytes(model: ConditionedUNet) -> bytes:
    meta = [model.n_levels, model.base_channels, model.n_mels, model.cond_dim]
    return weights_to_bytes(meta, _tensors(model))


def model_from_bytes(buf: bytes) -> ConditionedUNet:
    meta, tensors = weights_from_bytes(buf)
    if len(meta) != 4:
        raise FormatError(f"expected 4 metadata fields, got {len(meta)}")
    n_levels, base_channels, n_mels, cond_dim = meta
    model = ConditionedUNet(n_levels, base_channels, n_mels, cond_dim)
    expected = _tensors(model)
    if set(expected) != set(tensors):
        missing = sorted(set(expected) - set(tensors))
        extra = sorted(set(tensors) - set(expected))
        raise FormatError(f"weights do not match the channel plan (missing {missing[:3]}, "
                          f"unexpected {extra[:3]})")
    for name, arr in tensors.items():
        if arr.shape != expected[name].shape:
            raise FormatError(f"{name}: shape {arr.shape}, expected {expected[name].shape}")
    state = {k: torch.from_numpy(v) for k, v in tensors.items()}
    model.load_state_dict(state, strict=False)
    model.eval()
    return model


def save_weights(model: ConditionedUNet, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_weights(path) -> ConditionedUNet:
    return model_from_bytes(Path(path).read_bytes())
