"""Analytic approximate conversion: mel -> linear -> waveform -> mel.

Nothing here is trained. The mel-spectrogram is mapped back to a linear
magnitude spectrogram with the Moore-Penrose inverse of the source filterbank,
a waveform is recovered with plain Griffin-Lim, and the waveform is re-analysed
under the target configuration.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .config import MelConfig
from .dsp import (AMIN, GeometryError, MelSpectrogram, extract_mel, filterbank_for, istft,
                  resample, stft)
from .normalizer import to_linear_amplitude

DEFAULT_GL_ITERS = 32
PINV_RCOND = 1e-8


@functools.lru_cache(maxsize=64)
def _pinv_for(sample_rate, n_fft, n_mels, fmin, fmax) -> np.ndarray:
    cfg_fb = filterbank_for(MelConfig(sample_rate=sample_rate, n_fft=n_fft, win_length=n_fft,
                                      n_mels=n_mels, fmin=fmin, fmax=fmax))
    p = filterbank_pinv(cfg_fb)
    p.setflags(write=False)
    return p


def filterbank_pinv(fb: np.ndarray, rcond: float = PINV_RCOND) -> np.ndarray:
    """Moore-Penrose inverse via SVD; singular values below ``rcond * s_max`` are
    discarded. Raises GeometryError when that leaves fewer than ``n_mels``."""
    u, s, vt = np.linalg.svd(fb, full_matrices=False)
    keep = s > rcond * s.max()
    if keep.sum() < fb.shape[0]:
        raise GeometryError(f"degenerate filterbank: rank {keep.sum()} < {fb.shape[0]} mels")
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def pinv_for(cfg: MelConfig) -> np.ndarray:
    return _pinv_for(cfg.sample_rate, cfg.n_fft, cfg.n_mels, float(cfg.fmin), float(cfg.fmax))


def mel_to_linear(mel_amp: np.ndarray, cfg: MelConfig) -> np.ndarray:
    """Least-squares linear magnitudes ``(frames, n_fft//2+1)`` from mel
    amplitudes, clamped at zero."""
    return np.maximum(np.asarray(mel_amp, dtype=np.float64) @ pinv_for(cfg).T, 0.0)


@dataclass
class GriffinLimState:
    magnitudes: np.ndarray
    phases: np.ndarray
    iteration: int = 0
    consistency: list[float] = field(default_factory=list)
    waveform: Optional[np.ndarray] = None


def spectral_consistency(x: np.ndarray, magnitudes: np.ndarray, cfg: MelConfig) -> float:
    """``|| |STFT(x)| - M || / ||M||``."""
    norm = np.linalg.norm(magnitudes)
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(np.abs(stft(x, cfg)) - magnitudes) / norm)


def griffin_lim(magnitudes: np.ndarray, cfg: MelConfig, n_iter: int = DEFAULT_GL_ITERS,
                callback: Callable[[int, float], Optional[bool]] | None = None,
                init_phase: np.ndarray | None = None) -> GriffinLimState:
    """Plain alternating-projection phase retrieval, starting from zero phase
    unless ``init_phase`` (radians) is given.

    ``callback(iteration, consistency)`` is called after each iteration; returning
    ``False`` stops early. The waveform is in ``state.waveform``.
    """
    magnitudes = np.asarray(magnitudes, dtype=np.float64)
    if magnitudes.ndim != 2 or magnitudes.shape[1] != cfg.n_fft // 2 + 1:
        raise GeometryError(f"magnitudes of shape {magnitudes.shape} do not match n_fft={cfg.n_fft}")
    if np.any(magnitudes < 0):
        raise ValueError("magnitudes must be non-negative")
    magnitudes.setflags(write=False)
    phases = np.ones(magnitudes.shape, dtype=np.complex128) if init_phase is None \
        else np.exp(1j * np.asarray(init_phase, dtype=np.float64))
    state = GriffinLimState(magnitudes, phases)
    if not magnitudes.any():
        state.waveform = istft(np.zeros(magnitudes.shape, dtype=np.complex128), cfg)
        return state
    for i in range(n_iter):
        x = istft(magnitudes * state.phases, cfg)
        spec = stft(x, cfg)
        mag = np.abs(spec)
        state.consistency.append(float(np.linalg.norm(mag - magnitudes) / np.linalg.norm(magnitudes)))
        state.phases = np.where(mag > 0, spec / np.where(mag > 0, mag, 1.0), 1.0)
        state.iteration = i + 1
        state.waveform = x
        if callback is not None and callback(state.iteration, state.consistency[-1]) is False:
            break
    return state


def mel_to_waveform(m: MelSpectrogram, n_iter: int = DEFAULT_GL_ITERS, callback=None) -> np.ndarray:
    """Invert a mel-spectrogram to audio at ``m.config.sample_rate``."""
    amp = to_linear_amplitude(m)
    # values on the dB floor are indistinguishable from silence
    amp = np.where(amp <= AMIN * (1 + 1e-9), 0.0, amp)
    return griffin_lim(mel_to_linear(amp, m.config), m.config, n_iter, callback).waveform


def approximate_convert(m_src: MelSpectrogram, cfg_tgt: MelConfig, n_iter: int = DEFAULT_GL_ITERS,
                        callback=None) -> MelSpectrogram:
    """Stage-1 conversion of ``m_src`` (tagged with its source config) to ``cfg_tgt``."""
    x = mel_to_waveform(m_src, n_iter, callback)
    if m_src.config.sample_rate != cfg_tgt.sample_rate:
        x = resample(x, m_src.config.sample_rate, cfg_tgt.sample_rate)
    return extract_mel(x, cfg_tgt)
