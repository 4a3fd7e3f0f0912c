"""Spectral kernels shared by every stage: STFT/ISTFT, mel filterbanks, dB maps."""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal

from .config import MelConfig

logger = logging.getLogger(__name__)

AMIN = 1e-5
WSS_FLOOR = 0.1

LINEAR = "linear"
DB = "db"
NORMALIZED = "normalized"
VALUE_SPACES = (LINEAR, DB, NORMALIZED)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MelSpectrogram:
    """A ``(frames, n_mels)`` matrix; its value space follows ``config``."""

    values: np.ndarray
    config: MelConfig

    @property
    def value_space(self) -> str:
        return value_space_of(self.config)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def with_values(self, values: np.ndarray) -> "MelSpectrogram":
        return MelSpectrogram(values, self.config)


def value_space_of(cfg: MelConfig) -> str:
    if cfg.normalize_mel:
        return NORMALIZED
    return DB if cfg.amp_to_db else LINEAR


# ---------------------------------------------------------------------------
# Framing.

def hann_window(win_length: int) -> np.ndarray:
    """Periodic Hann window. A length-1 window is ``[1.0]``."""
    if win_length < 1:
        raise ValueError("win_length must be >= 1")
    if win_length == 1:
        return np.ones(1)
    n = np.arange(win_length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / win_length)


@functools.lru_cache(maxsize=64)
def _analysis_window(n_fft: int, win_length: int) -> np.ndarray:
    # window centred inside the FFT frame, zeros elsewhere
    w = np.zeros(n_fft)
    start = (n_fft - win_length) // 2
    w[start:start + win_length] = hann_window(win_length)
    w.setflags(write=False)
    return w


def num_frames(n_samples: int, cfg: MelConfig) -> int:
    padded = n_samples + cfg.left_pad + cfg.right_pad
    if padded < cfg.n_fft:
        return 0
    return (padded - cfg.n_fft) // cfg.hop_length + 1


def stft(x: np.ndarray, cfg: MelConfig) -> np.ndarray:
    """Complex STFT, shape ``(frames, n_fft // 2 + 1)``.

    The waveform is zero-padded by ``left_pad``/``right_pad`` before framing.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise GeometryError("stft expects a non-empty mono waveform")
    padded = np.pad(x, (cfg.left_pad, cfg.right_pad))
    if padded.size < cfg.n_fft:
        raise GeometryError(
            f"waveform of {x.size} samples is shorter than one frame "
            f"(n_fft={cfg.n_fft}, pads={cfg.left_pad}/{cfg.right_pad})")
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.n_fft)[::cfg.hop_length]
    return np.fft.rfft(frames * _analysis_window(cfg.n_fft, cfg.win_length), axis=1)


def istft(spec: np.ndarray, cfg: MelConfig, length: int | None = None) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`stft`.

    Each frame is windowed again and the sum is divided by the summed squared
    window, so any STFT produced by :func:`stft` is inverted exactly wherever the
    the summed squared window exceeds ``WSS_FLOOR`` of its peak. Pads are stripped; ``length`` trims or zero-extends.
    """
    spec = np.asarray(spec)
    n_bins = cfg.n_fft // 2 + 1
    if spec.ndim != 2 or spec.shape[1] != n_bins:
        raise GeometryError(f"expected (frames, {n_bins}) spectrum, got {spec.shape}")
    n_frames = spec.shape[0]
    window = _analysis_window(cfg.n_fft, cfg.win_length)
    total = (n_frames - 1) * cfg.hop_length + cfg.n_fft if n_frames else 0
    frames = np.fft.irfft(spec, n=cfg.n_fft, axis=1) * window
    idx = (np.arange(n_frames)[:, None] * cfg.hop_length + np.arange(cfg.n_fft)).ravel()
    y = np.bincount(idx, weights=frames.ravel(), minlength=total)
    wss = _window_sumsquare(n_frames, cfg.n_fft, cfg.win_length, cfg.hop_length)
    if total:
        # edge samples seen only by window tails would be amplified without bound
        y /= np.maximum(wss, WSS_FLOOR * wss.max())
    y = y[cfg.left_pad:total - cfg.right_pad] if total - cfg.right_pad > cfg.left_pad else y[:0]
    if length is not None:
        y = y[:length] if y.size >= length else np.pad(y, (0, length - y.size))
    return y


@functools.lru_cache(maxsize=64)
def _window_sumsquare(n_frames: int, n_fft: int, win_length: int, hop: int) -> np.ndarray:
    w2 = _analysis_window(n_fft, win_length) ** 2
    total = (n_frames - 1) * hop + n_fft if n_frames else 0
    idx = (np.arange(n_frames)[:, None] * hop + np.arange(n_fft)).ravel()
    out = np.bincount(idx, weights=np.tile(w2, n_frames), minlength=total)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Mel scale and filterbank.

_F_SP = 200.0 / 3
_MIN_LOG_HZ = 1000.0
_MIN_LOG_MEL = _MIN_LOG_HZ / _F_SP
_LOGSTEP = math.log(6.4) / 27.0


def hz_to_mel(f, htk: bool = False):
    f = np.asarray(f, dtype=np.float64)
    if htk:
        return 2595.0 * np.log10(1.0 + f / 700.0)
    return np.where(f >= _MIN_LOG_HZ,
                    _MIN_LOG_MEL + np.log(np.maximum(f, 1e-12) / _MIN_LOG_HZ) / _LOGSTEP,
                    f / _F_SP)


def mel_to_hz(m, htk: bool = False):
    m = np.asarray(m, dtype=np.float64)
    if htk:
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return np.where(m >= _MIN_LOG_MEL,
                    _MIN_LOG_HZ * np.exp(_LOGSTEP * (m - _MIN_LOG_MEL)),
                    _F_SP * m)


def mel_frequencies(n_mels: int, fmin: float, fmax: float, htk: bool = False) -> np.ndarray:
    """``n_mels + 2`` band edges, uniformly spaced on the mel scale."""
    mels = np.linspace(hz_to_mel(fmin, htk), hz_to_mel(fmax, htk), n_mels + 2)
    return mel_to_hz(mels, htk)


@functools.lru_cache(maxsize=64)
def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int, fmin: float, fmax: float,
                   htk: bool = False) -> np.ndarray:
    """Triangular filters of shape ``(n_mels, n_fft // 2 + 1)``, area-normalized
    (each filter scaled by ``2 / bandwidth``). The result is read-only and cached.
    """
    fft_freqs = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    edges = mel_frequencies(n_mels, fmin, fmax, htk)
    widths = np.diff(edges)
    ramps = edges[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / widths[:-1, None]
    upper = ramps[2:] / widths[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    empty = np.flatnonzero(weights.max(axis=1) <= 0)
    if empty.size:
        raise GeometryError(
            f"{empty.size} mel filters cover no FFT bin (n_fft={n_fft}, n_mels={n_mels}, "
            f"range {fmin}-{fmax} Hz); use a larger n_fft or fewer mels")
    weights.setflags(write=False)
    return weights


def filterbank_for(cfg: MelConfig) -> np.ndarray:
    return mel_filterbank(cfg.sample_rate, cfg.n_fft, cfg.n_mels, float(cfg.fmin), float(cfg.fmax))


# ---------------------------------------------------------------------------
# Amplitude maps.

def amp_to_db(values, log_base: str = "10", log_factor: float = 20.0, amin: float = AMIN):
    base = math.e if log_base == "e" else 10.0
    return log_factor * np.log(np.maximum(values, amin)) / math.log(base)


def db_to_amp(values, log_base: str = "10", log_factor: float = 20.0):
    base = math.e if log_base == "e" else 10.0
    return np.exp(np.asarray(values) / log_factor * math.log(base))


def normalize_db(db, ref_level_db: float, min_level_db: float):
    return np.clip((db - ref_level_db - min_level_db) / -min_level_db, 0.0, 1.0)


def denormalize_db(values, ref_level_db: float, min_level_db: float):
    return np.asarray(values) * -min_level_db + min_level_db + ref_level_db


def peak_normalize(x: np.ndarray, peak: float) -> np.ndarray:
    """Scale so that ``max |x| == peak``. All-zero input comes back unchanged."""
    x = np.asarray(x, dtype=np.float64)
    top = np.max(np.abs(x)) if x.size else 0.0
    if top == 0.0:
        logger.debug("peak_normalize: all-zero waveform left unchanged")
        return x
    return x * (peak / top)


def resample(x: np.ndarray, orig_rate: int, target_rate: int) -> np.ndarray:
    """Band-limited polyphase resampling."""
    if orig_rate <= 0 or target_rate <= 0:
        raise ValueError("sample rates must be positive")
    x = np.asarray(x, dtype=np.float64)
    if orig_rate == target_rate:
        return x
    ratio = Fraction(target_rate, orig_rate)
    return signal.resample_poly(x, ratio.numerator, ratio.denominator)


# ---------------------------------------------------------------------------
# Extraction.

def linear_to_mel(magnitudes: np.ndarray, cfg: MelConfig) -> np.ndarray:
    return magnitudes @ filterbank_for(cfg).T


def mel_amplitude_to_space(mel_amp: np.ndarray, cfg: MelConfig) -> np.ndarray:
    """Map linear mel amplitudes into the value space declared by ``cfg``."""
    if not cfg.amp_to_db:
        return mel_amp
    db = amp_to_db(mel_amp, cfg.log_base, cfg.log_factor)
    if cfg.normalize_mel:
        return normalize_db(db, cfg.ref_level_db, cfg.min_level_db)
    return db


def extract_mel(x: np.ndarray, cfg: MelConfig, sample_rate: int | None = None) -> MelSpectrogram:
    """Peak-normalize, STFT, mel filterbank, then the (b)-half value mapping."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot extract a mel-spectrogram from an empty waveform")
    if sample_rate is not None and sample_rate != cfg.sample_rate:
        x = resample(x, sample_rate, cfg.sample_rate)
    x = peak_normalize(x, cfg.wave_peak_norm)
    mag = np.abs(stft(x, cfg))
    return MelSpectrogram(mel_amplitude_to_space(linear_to_mel(mag, cfg), cfg), cfg)
