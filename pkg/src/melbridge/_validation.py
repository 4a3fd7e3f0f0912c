"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .config import MelConfig, load_config
from .dsp import MelSpectrogram


def check_config(cfg) -> MelConfig:
    """Accept a MelConfig, a builtin name or a path to a config file."""
    if isinstance(cfg, MelConfig):
        return cfg
    return load_config(cfg)


def check_waveform(x, name: str = "waveform") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2 and 1 in x.shape:
        x = x.ravel()
    if x.ndim != 1:
        raise ValueError(f"{name} must be mono (1-D), got shape {x.shape}")
    if x.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite samples")
    return x


def check_waveforms(X, name: str = "X") -> list[np.ndarray]:
    if isinstance(X, np.ndarray) and X.ndim == 1:
        X = [X]
    return [check_waveform(x, f"{name}[{i}]") for i, x in enumerate(X)]


def check_mel(m, name: str = "mel") -> MelSpectrogram:
    if not isinstance(m, MelSpectrogram):
        raise TypeError(f"{name} must be a MelSpectrogram (values tagged with their config)")
    v = np.asarray(m.values)
    if v.ndim != 2 or v.shape[1] != m.config.n_mels:
        raise ValueError(f"{name} must have shape (frames, {m.config.n_mels}), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return m


def check_mels(X, name: str = "X") -> tuple[list[MelSpectrogram], bool]:
    """Returns the list and whether a single spectrogram was passed."""
    if isinstance(X, MelSpectrogram):
        return [check_mel(X, name)], True
    return [check_mel(m, f"{name}[{i}]") for i, m in enumerate(X)], False
