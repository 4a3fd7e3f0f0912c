"""Exact conversions between the normalizable value spaces.

Everything passes through the normalizing base: natural-log amplitude with
factor 1 and no [0, 1] squashing. Clipped values (0 or 1 in a normalized space)
map to the range endpoints; what the clip threw away is not recovered here.
"""

from __future__ import annotations

import math
from dataclasses import asdict

import numpy as np

from .config import NORMALIZING_BASE, MelConfig, NormalizableParams
from .dsp import AMIN, MelSpectrogram, denormalize_db, normalize_db


class ValueSpaceError(ValueError):
    pass


def _ln_base(b: NormalizableParams) -> float:
    return 1.0 if b.log_base == "e" else math.log(10.0)


def with_normalizable(cfg: MelConfig, b: NormalizableParams) -> MelConfig:
    return cfg.replace(**asdict(b))


def values_to_base(values: np.ndarray, b: NormalizableParams) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if not b.amp_to_db:
        return np.log(np.maximum(values, AMIN))
    if b.normalize_mel:
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueSpaceError("normalized mel values must lie in [0, 1]")
        values = denormalize_db(values, b.ref_level_db, b.min_level_db)
    return values * (_ln_base(b) / b.log_factor)


def values_from_base(values: np.ndarray, b: NormalizableParams) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if not b.amp_to_db:
        return np.exp(values)
    db = values * (b.log_factor / _ln_base(b))
    if b.normalize_mel:
        return normalize_db(db, b.ref_level_db, b.min_level_db)
    return db


def to_base(m: MelSpectrogram) -> MelSpectrogram:
    """Re-express ``m`` in the normalizing base."""
    b = m.config.normalizable
    return MelSpectrogram(values_to_base(m.values, b), with_normalizable(m.config, NORMALIZING_BASE))


def from_base(m_base: MelSpectrogram, target: NormalizableParams) -> MelSpectrogram:
    if m_base.config.normalizable != NORMALIZING_BASE:
        raise ValueSpaceError("from_base expects a mel-spectrogram in the normalizing base")
    return MelSpectrogram(values_from_base(m_base.values, target),
                          with_normalizable(m_base.config, target))


def convert_normalizable(m: MelSpectrogram, target: NormalizableParams) -> MelSpectrogram:
    return from_base(to_base(m), target)


def to_linear_amplitude(m: MelSpectrogram) -> np.ndarray:
    """Mel amplitudes (no log) from any value space."""
    if not m.config.amp_to_db:
        return np.asarray(m.values, dtype=np.float64)
    return np.exp(values_to_base(m.values, m.config.normalizable))


def convert_values(values: np.ndarray, src: NormalizableParams, tgt: NormalizableParams) -> np.ndarray:
    """Closed-form map of raw values from ``src`` to ``tgt`` settings."""
    if src == tgt:
        return np.asarray(values, dtype=np.float64)
    return values_from_base(values_to_base(values, src), tgt)
