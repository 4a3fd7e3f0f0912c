"""Reference conversions the adaptor is compared against."""

from __future__ import annotations

import numpy as np

from .config import MelConfig
from .dsp import MelSpectrogram
from .normalizer import convert_values
from .stage1 import DEFAULT_GL_ITERS, approximate_convert


def interpolation_baseline(m_src: MelSpectrogram, cfg_tgt: MelConfig) -> MelSpectrogram:
    """Stretch the time axis to the target frame period and rescale the values.

    Frame ``j`` of the output samples the source at position ``j / ratio`` with
    ``ratio = (hop_src / sr_src) / (hop_tgt / sr_tgt)``; the output has
    ``floor((n_src - 1) * ratio) + 1`` frames. The mel axis is left alone.
    """
    cfg_src = m_src.config
    if cfg_src.n_mels != cfg_tgt.n_mels:
        raise ValueError("interpolation baseline needs equal n_mels")
    values = np.asarray(m_src.values, dtype=np.float64)
    n_src = len(values)
    ratio = (cfg_src.hop_length / cfg_src.sample_rate) / (cfg_tgt.hop_length / cfg_tgt.sample_rate)
    if ratio == 1.0 or n_src < 2:
        stretched = values
    else:
        n_out = int(np.floor((n_src - 1) * ratio + 1e-9)) + 1
        pos = np.arange(n_out) / ratio
        src = np.arange(n_src)
        stretched = np.stack([np.interp(pos, src, values[:, k]) for k in range(values.shape[1])], axis=1)
    out = convert_values(stretched, cfg_src.normalizable, cfg_tgt.normalizable)
    return MelSpectrogram(out, cfg_tgt)


def griffin_only_baseline(m_src: MelSpectrogram, cfg_tgt: MelConfig,
                          n_iter: int = DEFAULT_GL_ITERS) -> MelSpectrogram:
    """Stage 1 alone."""
    return approximate_convert(m_src, cfg_tgt, n_iter)
