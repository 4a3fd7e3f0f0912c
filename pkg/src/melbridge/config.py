"""Mel-extraction configurations.

A :class:`MelConfig` carries every knob of a mel-spectrogram front end. The
knobs split in two halves:

* non-normalizable (:class:`NonNormalizableParams`): STFT geometry, filterbank
  bounds and waveform peak normalization. No closed-form mel-to-mel map exists
  for a change in any of these.
* normalizable (:class:`NormalizableParams`): dB conversion, log base/factor and
  [0, 1] normalization. These convert exactly (see :mod:`melbridge.normalizer`).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Raised for malformed config documents or invariant violations."""


@dataclass(frozen=True)
class NonNormalizableParams:
    wave_peak_norm: float
    n_fft: int
    win_length: int
    hop_length: int
    left_pad: int
    right_pad: int
    fmin: float
    fmax: float


@dataclass(frozen=True)
class NormalizableParams:
    amp_to_db: bool
    log_base: str  # "10" or "e"
    log_factor: float
    normalize_mel: bool
    ref_level_db: float
    min_level_db: float

    @property
    def log_base_value(self) -> float:
        return math.e if self.log_base == "e" else 10.0


NORMALIZING_BASE = NormalizableParams(
    amp_to_db=True,
    log_base="e",
    log_factor=1.0,
    normalize_mel=False,
    ref_level_db=0.0,
    min_level_db=-100.0,
)

_A_FIELDS = [f.name for f in fields(NonNormalizableParams)]
_B_FIELDS = [f.name for f in fields(NormalizableParams)]


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 22050
    n_mels: int = 80
    wave_peak_norm: float = 1.0
    n_fft: int = 1024
    win_length: int = 1024
    hop_length: int = 256
    left_pad: int = 0
    right_pad: int = 0
    fmin: float = 0.0
    fmax: float = 8000.0
    amp_to_db: bool = True
    log_base: str = "e"
    log_factor: float = 1.0
    normalize_mel: bool = False
    ref_level_db: float = 0.0
    min_level_db: float = -100.0

    def __post_init__(self):
        validate(self)

    @property
    def non_normalizable(self) -> NonNormalizableParams:
        return NonNormalizableParams(**{k: getattr(self, k) for k in _A_FIELDS})

    @property
    def normalizable(self) -> NormalizableParams:
        return NormalizableParams(**{k: getattr(self, k) for k in _B_FIELDS})

    def replace(self, **changes) -> "MelConfig":
        return replace(self, **changes)


def validate(cfg: MelConfig) -> None:
    """Check every MelConfig invariant, raising ConfigError naming the field."""

    def fail(field, msg):
        raise ConfigError(f"{field}: {msg}")

    if cfg.sample_rate <= 0:
        fail("sample_rate", f"must be positive, got {cfg.sample_rate}")
    if cfg.n_mels < 1:
        fail("n_mels", f"must be >= 1, got {cfg.n_mels}")
    if not 0.0 < cfg.wave_peak_norm <= 1.0:
        fail("wave_peak_norm", f"must lie in (0, 1], got {cfg.wave_peak_norm}")
    if cfg.n_fft < 1:
        fail("n_fft", f"must be >= 1, got {cfg.n_fft}")
    if not 1 <= cfg.win_length <= cfg.n_fft:
        fail("win_length", f"must lie in [1, n_fft={cfg.n_fft}], got {cfg.win_length}")
    if cfg.hop_length < 1:
        fail("hop_length", f"must be >= 1, got {cfg.hop_length}")
    if cfg.left_pad < 0:
        fail("left_pad", f"must be >= 0, got {cfg.left_pad}")
    if cfg.right_pad < 0:
        fail("right_pad", f"must be >= 0, got {cfg.right_pad}")
    if cfg.fmin < 0:
        fail("fmin", f"must be >= 0, got {cfg.fmin}")
    if cfg.fmax > cfg.sample_rate / 2:
        fail("fmax", f"must be <= sample_rate/2 = {cfg.sample_rate / 2}, got {cfg.fmax}")
    if cfg.fmin >= cfg.fmax:
        fail("fmin", f"must be < fmax={cfg.fmax}, got {cfg.fmin}")
    if cfg.log_base not in ("10", "e"):
        fail("log_base", f"must be '10' or 'e', got {cfg.log_base!r}")
    if cfg.log_factor not in (1.0, 20.0):
        fail("log_factor", f"must be 1 or 20, got {cfg.log_factor}")
    if cfg.min_level_db >= 0:
        fail("min_level_db", f"must be negative, got {cfg.min_level_db}")
    if cfg.normalize_mel and not cfg.amp_to_db:
        fail("normalize_mel", "requires amp_to_db = true")


def split_config(cfg: MelConfig) -> tuple[NonNormalizableParams, NormalizableParams]:
    return cfg.non_normalizable, cfg.normalizable


def recombine(a: NonNormalizableParams, b: NormalizableParams, sample_rate: int = 22050,
              n_mels: int = 80) -> MelConfig:
    return MelConfig(sample_rate=sample_rate, n_mels=n_mels, **asdict(a), **asdict(b))


# ---------------------------------------------------------------------------
# Document format: one ``key = value`` per line, ``#`` comments.

_INT_FIELDS = {"sample_rate", "n_mels", "n_fft", "win_length", "hop_length", "left_pad", "right_pad"}
_BOOL_FIELDS = {"amp_to_db", "normalize_mel"}
_FLOAT_FIELDS = {"wave_peak_norm", "fmin", "fmax", "log_factor", "ref_level_db", "min_level_db"}
FIELD_ORDER = [f.name for f in fields(MelConfig)]


def _parse_value(key: str, raw: str, lineno: int):
    try:
        if key in _INT_FIELDS:
            return int(raw)
        if key in _FLOAT_FIELDS:
            return float(raw)
        if key in _BOOL_FIELDS:
            if raw not in ("true", "false"):
                raise ValueError(raw)
            return raw == "true"
        if key == "log_base":
            if raw not in ("10", "e"):
                raise ValueError(raw)
            return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value for {key}: {raw!r}") from None
    raise AssertionError(key)


def parse_config(text: str) -> MelConfig:
    """Parse a config document. Missing keys take the MelConfig defaults."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in FIELD_ORDER:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw, lineno)
    return MelConfig(**values)


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: MelConfig) -> str:
    return "".join(f"{k} = {_format_value(getattr(cfg, k))}\n" for k in FIELD_ORDER)


def load_config(path_or_name: str | Path) -> MelConfig:
    """Load a config file, or a builtin when given one of ``cfg1`` ... ``cfg7``."""
    if str(path_or_name) in BUILTIN_CONFIGS:
        return builtin_config(str(path_or_name))
    return parse_config(Path(path_or_name).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# The seven reference front ends.

_DB10 = dict(amp_to_db=True, log_base="10")
_LN = dict(amp_to_db=True, log_base="e", log_factor=1.0, normalize_mel=False)

BUILTIN_CONFIGS: dict[str, MelConfig] = {
    "cfg1": MelConfig(wave_peak_norm=1.0, n_fft=2048, win_length=1100, hop_length=275,
                      fmin=40.0, fmax=11025.0, log_factor=20.0, normalize_mel=True, **_DB10),
    "cfg2": MelConfig(wave_peak_norm=1.0, n_fft=1024, win_length=1024, hop_length=256,
                      fmin=0.0, fmax=8000.0, **_LN),
    "cfg3": MelConfig(wave_peak_norm=1.0, n_fft=1024, win_length=1024, hop_length=256,
                      left_pad=384, right_pad=384, fmin=0.0, fmax=8000.0, **_LN),
    "cfg4": MelConfig(wave_peak_norm=0.95, n_fft=1024, win_length=1024, hop_length=256,
                      left_pad=384, right_pad=384, fmin=0.0, fmax=11025.0,
                      log_factor=1.0, normalize_mel=False, **_DB10),
    "cfg5": MelConfig(sample_rate=24000, wave_peak_norm=1.0, n_fft=2048, win_length=1200,
                      hop_length=300, fmin=0.0, fmax=12000.0, log_factor=20.0,
                      normalize_mel=False, **_DB10),
    "cfg6": MelConfig(wave_peak_norm=0.95, n_fft=1024, win_length=1024, hop_length=240,
                      left_pad=392, right_pad=392, fmin=0.0, fmax=8000.0, **_LN),
    "cfg7": MelConfig(sample_rate=16000, wave_peak_norm=1.0, n_fft=465, win_length=465,
                      hop_length=160, fmin=80.0, fmax=8000.0, **_LN),
}


def builtin_config(name: str) -> MelConfig:
    try:
        return BUILTIN_CONFIGS[name]
    except KeyError:
        raise ConfigError(f"unknown builtin config {name!r}; expected one of "
                          f"{', '.join(BUILTIN_CONFIGS)}") from None


# ---------------------------------------------------------------------------
# Conditioning features.

# (offset, scale) per dimension; maps the sampling grid into roughly [0, 1].
_FEATURE_AFFINE = np.array([
    (0.9, 0.1),                             # wave_peak_norm
    (0.0, 2048.0),                          # n_fft
    (math.log(512), math.log(2048 / 512)),  # ln(win_length)
    (math.log(128), math.log(512 / 128)),   # ln(hop_length)
    (0.0, 1024.0),                          # left_pad
    (0.0, 1024.0),                          # right_pad
    (0.0, 100.0),                           # fmin
    (0.0, 12000.0),                         # fmax
])


def raw_config_features(p: NonNormalizableParams) -> np.ndarray:
    """Unscaled 8-dim encoding: window and hop enter as natural logs."""
    return np.array([
        p.wave_peak_norm,
        p.n_fft,
        math.log(p.win_length),
        math.log(p.hop_length),
        p.left_pad,
        p.right_pad,
        p.fmin,
        p.fmax,
    ], dtype=np.float64)


def encode_config_features(p: NonNormalizableParams | MelConfig) -> np.ndarray:
    """Conditioning vector in the order
    ``[peak, n_fft, ln win, ln hop, left_pad, right_pad, fmin, fmax]``."""
    if isinstance(p, MelConfig):
        p = p.non_normalizable
    raw = raw_config_features(p)
    return (raw - _FEATURE_AFFINE[:, 0]) / _FEATURE_AFFINE[:, 1]


# ---------------------------------------------------------------------------
# Random configurations for training.

PEAK_RANGE = (0.9, 1.0)
N_FFT_CHOICES = (1024, 2048)
WIN_CHOICES = (800, 900, 1024, 1100, 1200)
FMIN_CHOICES = (0.0, 30.0, 50.0, 70.0, 90.0)
FMAX_CHOICES = (7600.0, 8000.0, 9500.0, 11025.0)
LOG_BASE_CHOICES = ("10", "e")
LOG_FACTOR_CHOICES = (20.0, 1.0)


def center_pad(n_fft: int, hop_length: int) -> int:
    return (n_fft - hop_length) // 2


def sample_random_config(rng: np.random.Generator, exclude=(), sample_rate: int = 22050,
                         n_mels: int = 80, max_tries: int = 1000) -> MelConfig:
    """Draw a config from the training grid, rejecting invalid or excluded draws."""
    exclude = set(exclude)
    for _ in range(max_tries):
        n_fft = int(rng.choice(N_FFT_CHOICES))
        win = int(rng.choice(WIN_CHOICES))
        # each draw consumes the same number of variates so the stream stays aligned
        peak = float(rng.uniform(*PEAK_RANGE))
        pads = rng.integers(0, 2, size=2)
        fmin = float(rng.choice(FMIN_CHOICES))
        fmax = float(rng.choice(FMAX_CHOICES))
        amp_to_db = bool(rng.integers(0, 2))
        log_base = str(rng.choice(LOG_BASE_CHOICES))
        log_factor = float(rng.choice(LOG_FACTOR_CHOICES))
        normalize = bool(rng.integers(0, 2))
        if win > n_fft or fmax > sample_rate / 2:
            continue
        if normalize and not amp_to_db:
            continue
        hop = win // 4
        pad = center_pad(n_fft, hop)
        cfg = MelConfig(
            sample_rate=sample_rate, n_mels=n_mels, wave_peak_norm=peak, n_fft=n_fft,
            win_length=win, hop_length=hop, left_pad=pad * int(pads[0]),
            right_pad=pad * int(pads[1]), fmin=fmin, fmax=fmax, amp_to_db=amp_to_db,
            log_base=log_base, log_factor=log_factor, normalize_mel=normalize,
        )
        if cfg not in exclude:
            return cfg
    raise ConfigError(f"no admissible config after {max_tries} draws")
