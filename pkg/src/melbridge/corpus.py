"""Synthetic speech-like clips: a gliding harmonic source shaped by formant
resonances, plus band-passed noise bursts, under a syllabic envelope."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import signal

from .formats import read_wav, write_wav


def _envelope(rng, n, sr, n_syllables):
    env = np.zeros(n)
    centers = np.sort(rng.uniform(0.1, 0.9, size=n_syllables)) * n
    for c in centers:
        width = int(rng.uniform(0.08, 0.25) * sr)
        lo, hi = int(max(0, c - width // 2)), int(min(n, c + width // 2))
        env[lo:hi] += np.hanning(hi - lo) * rng.uniform(0.5, 1.0)
    return np.minimum(env, 1.0)


def harmonic_source(rng, n, sr):
    t = np.arange(n) / sr
    f0_base = rng.uniform(90.0, 260.0)
    drift = 1.0 + 0.15 * np.sin(2 * np.pi * rng.uniform(0.3, 1.5) * t + rng.uniform(0, 2 * np.pi))
    vibrato = 1.0 + 0.01 * np.sin(2 * np.pi * rng.uniform(4.0, 7.0) * t)
    f0 = f0_base * drift * vibrato
    phase = 2 * np.pi * np.cumsum(f0) / sr
    formants = np.sort(rng.uniform([300, 900, 2200], [900, 2200, 3500]))
    bandwidths = rng.uniform(80, 250, size=3)
    x = np.zeros(n)
    for k in range(1, int(sr / 2 / f0.min())):
        fk = k * f0
        gain = sum(np.exp(-0.5 * ((fk - fm) / bw) ** 2) for fm, bw in zip(formants, bandwidths))
        gain = gain + 0.02 * (1000.0 / np.maximum(fk, 1.0))
        gain = np.where(fk < sr / 2 - 100, gain, 0.0)
        x += gain * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    return x


def noise_source(rng, n, sr):
    lo = rng.uniform(2500, 6000)
    hi = min(lo + rng.uniform(1500, 4000), sr / 2 * 0.95)
    sos = signal.butter(4, [lo, hi], btype="bandpass", fs=sr, output="sos")
    return signal.sosfilt(sos, rng.standard_normal(n))


def synthetic_clip(rng: np.random.Generator, sample_rate: int = 22050, duration: float = 1.0) -> np.ndarray:
    n = int(round(duration * sample_rate))
    voiced = harmonic_source(rng, n, sample_rate) * _envelope(rng, n, sample_rate, rng.integers(2, 5))
    noise = noise_source(rng, n, sample_rate) * _envelope(rng, n, sample_rate, rng.integers(1, 3))
    x = voiced / (np.abs(voiced).max() + 1e-12) + rng.uniform(0.1, 0.4) * noise / (np.abs(noise).max() + 1e-12)
    x += 1e-3 * rng.standard_normal(n)
    return 0.8 * x / np.abs(x).max()


def synthetic_corpus(n_clips: int, seed: int = 0, sample_rate: int = 22050,
                     duration: float = 1.0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [synthetic_clip(rng, sample_rate, duration) for _ in range(n_clips)]


def write_corpus(directory, clips, sample_rate: int = 22050) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, x in enumerate(clips):
        p = directory / f"clip{i:04d}.wav"
        write_wav(p, x, sample_rate)
        paths.append(p)
    return paths


def read_corpus(directory) -> tuple[list[str], list[np.ndarray], int]:
    """All ``*.wav`` files in ``directory`` (sorted); they must share one rate."""
    paths = sorted(Path(directory).glob("*.wav"))
    if not paths:
        raise FileNotFoundError(f"no .wav files in {directory}")
    clips, rates = [], set()
    for p in paths:
        x, sr = read_wav(p)
        clips.append(x)
        rates.add(sr)
    if len(rates) != 1:
        raise ValueError(f"corpus mixes sample rates {sorted(rates)}")
    return [p.stem for p in paths], clips, rates.pop()
