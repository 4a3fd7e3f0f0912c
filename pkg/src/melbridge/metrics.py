"""Objective comparisons between a generated and a reference waveform.

Comparisons are frame-aligned (no DTW): both signals are analysed with the same
hop and trimmed to the shorter frame count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.fft import dct

from .dsp import AMIN, filterbank_for, stft
from .config import MelConfig

MCD_ORDER = 13
MCD_CONST = 10.0 / math.log(10.0) * math.sqrt(2.0)

YIN_WINDOW_S = 0.025
YIN_HOP_S = 0.010
YIN_THRESHOLD = 0.15
F0_MIN = 50.0
F0_MAX = 600.0


def cepstral_analysis_config(sample_rate: int) -> MelConfig:
    """Fixed front end used for cepstra, independent of any vocoder config."""
    return MelConfig(sample_rate=sample_rate, n_mels=80, n_fft=1024, win_length=1024,
                     hop_length=256, fmin=0.0, fmax=sample_rate / 2.0)


def mel_cepstra(x: np.ndarray, sample_rate: int, order: int = MCD_ORDER) -> np.ndarray:
    """Orthonormal DCT-II of the natural-log mel spectrum, coefficients 1..order."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("mel_cepstra: empty waveform")
    cfg = cepstral_analysis_config(sample_rate)
    if x.size < cfg.n_fft:
        x = np.pad(x, (0, cfg.n_fft - x.size))
    log_mel = np.log(np.maximum(np.abs(stft(x, cfg)) @ filterbank_for(cfg).T, AMIN))
    return dct(log_mel, type=2, norm="ortho", axis=1)[:, 1:order + 1]


def mcd(a: np.ndarray, b: np.ndarray, sample_rate: int, order: int = MCD_ORDER) -> float:
    """Mel-cepstral distortion in dB, averaged over the common frames."""
    ca, cb = mel_cepstra(a, sample_rate, order), mel_cepstra(b, sample_rate, order)
    n = min(len(ca), len(cb))
    if n == 0:
        raise ValueError("mcd: no overlapping frames")
    return float(MCD_CONST * np.mean(np.linalg.norm(ca[:n] - cb[:n], axis=1)))


@dataclass(frozen=True)
class F0Track:
    f0: np.ndarray       # Hz, 0 where unvoiced
    voiced: np.ndarray   # bool
    hop: int             # samples
    sample_rate: int


def _difference_function(frames: np.ndarray, window: int, max_lag: int) -> np.ndarray:
    # d(tau) = sum_j (x_j - x_{j+tau})^2 for j < window, via FFT correlation
    n = frames.shape[1]
    size = 1 << (n + window - 1).bit_length()
    fx = np.fft.rfft(frames, size, axis=1)
    fw = np.fft.rfft(frames[:, :window], size, axis=1)
    corr = np.fft.irfft(fx * np.conj(fw), size, axis=1)[:, :max_lag + 1]
    sq = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(frames ** 2, axis=1)], axis=1)
    lags = np.arange(max_lag + 1)
    energy_head = sq[:, window][:, None]
    energy_lag = sq[:, lags + window] - sq[:, lags]
    return np.maximum(energy_head + energy_lag - 2.0 * corr, 0.0)


def estimate_f0(x: np.ndarray, sample_rate: int, threshold: float = YIN_THRESHOLD,
                fmin: float = F0_MIN, fmax: float = F0_MAX) -> F0Track:
    """YIN pitch tracker (25 ms window, 10 ms hop)."""
    x = np.asarray(x, dtype=np.float64)
    window = int(round(YIN_WINDOW_S * sample_rate))
    hop = int(round(YIN_HOP_S * sample_rate))
    min_lag = max(2, int(math.floor(sample_rate / fmax)))
    max_lag = int(math.ceil(sample_rate / fmin))
    n_frames = 1 + max(0, x.size - window) // hop if x.size else 0
    if n_frames == 0:
        return F0Track(np.zeros(0), np.zeros(0, bool), hop, sample_rate)
    padded = np.pad(x, (0, (n_frames - 1) * hop + window + max_lag - x.size))
    frames = np.lib.stride_tricks.sliding_window_view(padded, window + max_lag)[::hop][:n_frames]
    d = _difference_function(frames, window, max_lag)

    cum = np.cumsum(d[:, 1:], axis=1)
    lags = np.arange(1, max_lag + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cmnd = np.where(cum > 0, d[:, 1:] * lags / cum, 1.0)

    f0 = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    for i in range(n_frames):
        row = cmnd[i]
        below = np.flatnonzero(row[min_lag - 1:max_lag - 1] < threshold)
        if below.size == 0:
            continue
        k = below[0] + min_lag - 1  # index into row; lag = k + 1
        while k + 1 < max_lag - 1 and row[k + 1] < row[k]:
            k += 1
        tau = float(k + 1)
        if 0 < k < len(row) - 1:
            a, b, c = row[k - 1], row[k], row[k + 1]
            denom = a - 2 * b + c
            if denom > 0:
                tau += 0.5 * (a - c) / denom
        freq = sample_rate / tau
        if fmin <= freq <= fmax:
            f0[i] = freq
            voiced[i] = True
    return F0Track(f0, voiced, hop, sample_rate)


def _common(a: F0Track, b: F0Track) -> int:
    if a.hop != b.hop or a.sample_rate != b.sample_rate:
        raise ValueError("F0 tracks must share hop and sample rate")
    return min(len(a.f0), len(b.f0))


def f0_rmse(a: F0Track, b: F0Track) -> Optional[float]:
    """RMSE in Hz over frames voiced in both tracks; None when there are none."""
    n = _common(a, b)
    both = a.voiced[:n] & b.voiced[:n]
    if not both.any():
        return None
    return float(np.sqrt(np.mean((a.f0[:n][both] - b.f0[:n][both]) ** 2)))


def vuv_error(a: F0Track, b: F0Track) -> float:
    """Percentage of common frames whose voicing decisions differ."""
    n = _common(a, b)
    if n == 0:
        raise ValueError("vuv_error: no overlapping frames")
    return float(100.0 * np.mean(a.voiced[:n] != b.voiced[:n]))


def evaluate_pair(a: np.ndarray, b: np.ndarray, sample_rate: int) -> dict:
    """The record emitted by ``melbridge eval``."""
    ta, tb = estimate_f0(a, sample_rate), estimate_f0(b, sample_rate)
    return {
        "mcd_db": mcd(a, b, sample_rate),
        "f0_rmse_hz": f0_rmse(ta, tb),
        "vuv_error_pct": vuv_error(ta, tb),
        "frames": _common(ta, tb),
    }
