"""Convert mel-spectrograms between vocoder front-end configurations."""

from .config import (BUILTIN_CONFIGS, NORMALIZING_BASE, ConfigError, MelConfig,
                     NonNormalizableParams, NormalizableParams, builtin_config,
                     encode_config_features, load_config, parse_config, sample_random_config,
                     serialize_config, split_config)
from .dsp import MelSpectrogram, extract_mel
from .estimator import MelExtractor, UniversalAdaptor

__all__ = [
    "BUILTIN_CONFIGS", "NORMALIZING_BASE", "ConfigError", "MelConfig", "MelExtractor",
    "MelSpectrogram", "NonNormalizableParams", "NormalizableParams", "UniversalAdaptor",
    "builtin_config", "encode_config_features", "extract_mel", "load_config", "parse_config",
    "sample_random_config", "serialize_config", "split_config",
]
__version__ = "0.1.0"
