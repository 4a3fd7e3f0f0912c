"""On-disk formats: 16-bit PCM WAV, MELT mel tensors and UAW1 weight files.

MELT layout (little-endian)::

    b"MELT" | u32 version | u32 n_mels | u32 n_frames | u8 value_space
    | u32 config_len | config document (UTF-8) | float32[n_frames * n_mels]

UAW1 layout (little-endian)::

    b"UAW1" | u32 version | u32 n_meta | u32[n_meta] metadata
    | u32 n_tensors | per tensor: u32 name_len, name, u32 rank, u32[rank] dims,
      float32 data
"""

from __future__ import annotations

import io
import struct
import wave
from pathlib import Path

import numpy as np

from .config import parse_config, serialize_config
from .dsp import VALUE_SPACES, MelSpectrogram


class FormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# WAV

def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a mono 16-bit PCM WAV as float64 samples in [-1, 1)."""
    with wave.open(str(path), "rb") as f:
        if f.getsampwidth() != 2:
            raise FormatError(f"{path}: only 16-bit PCM is supported")
        if f.getnchannels() != 1:
            raise FormatError(f"{path}: only mono audio is supported")
        rate = f.getframerate()
        data = f.readframes(f.getnframes())
    return np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0, rate


def float_to_pcm16(x: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(x) * 32768.0), -32768, 32767).astype("<i2")


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono 16-bit PCM. Float input is scaled by 32768 and clipped;
    int16 input is written verbatim."""
    samples = np.asarray(samples)
    pcm = samples.astype("<i2") if samples.dtype == np.int16 else float_to_pcm16(samples)
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(int(sample_rate))
        f.writeframes(pcm.tobytes())


# ---------------------------------------------------------------------------
# MELT

MELT_MAGIC = b"MELT"
MELT_VERSION = 1


def mel_to_bytes(m: MelSpectrogram) -> bytes:
    values = np.ascontiguousarray(m.values, dtype="<f4")
    doc = serialize_config(m.config).encode("utf-8")
    n_frames, n_mels = values.shape
    header = struct.pack("<4sIIIBI", MELT_MAGIC, MELT_VERSION, n_mels, n_frames,
                         VALUE_SPACES.index(m.value_space), len(doc))
    return header + doc + values.tobytes()


def mel_from_bytes(buf: bytes) -> MelSpectrogram:
    head = struct.calcsize("<4sIIIBI")
    if len(buf) < head:
        raise FormatError("truncated MELT header")
    magic, version, n_mels, n_frames, tag, doc_len = struct.unpack_from("<4sIIIBI", buf)
    if magic != MELT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MELT_MAGIC!r}")
    if version != MELT_VERSION:
        raise FormatError(f"unsupported MELT version {version}")
    cfg = parse_config(buf[head:head + doc_len].decode("utf-8"))
    offset = head + doc_len
    expected = n_frames * n_mels * 4
    if len(buf) - offset != expected:
        raise FormatError(f"MELT payload is {len(buf) - offset} bytes, expected {expected}")
    if tag >= len(VALUE_SPACES):
        raise FormatError(f"unknown value-space tag {tag}")
    values = np.frombuffer(buf, dtype="<f4", offset=offset).reshape(n_frames, n_mels)
    m = MelSpectrogram(values.astype(np.float64), cfg)
    if cfg.n_mels != n_mels:
        raise FormatError(f"header n_mels {n_mels} disagrees with config n_mels {cfg.n_mels}")
    if VALUE_SPACES[tag] != m.value_space:
        raise FormatError(f"value-space tag {VALUE_SPACES[tag]!r} disagrees with the embedded "
                          f"config ({m.value_space!r})")
    return m


def write_mel(path, m: MelSpectrogram) -> None:
    Path(path).write_bytes(mel_to_bytes(m))


def read_mel(path) -> MelSpectrogram:
    return mel_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# UAW1

UAW_MAGIC = b"UAW1"
UAW_VERSION = 1


def weights_to_bytes(metadata: list[int], tensors: dict[str, np.ndarray]) -> bytes:
    out = io.BytesIO()
    out.write(struct.pack("<4sII", UAW_MAGIC, UAW_VERSION, len(metadata)))
    out.write(struct.pack(f"<{len(metadata)}I", *metadata))
    out.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        raw = name.encode("utf-8")
        out.write(struct.pack("<I", len(raw)))
        out.write(raw)
        out.write(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        out.write(arr.tobytes())
    return out.getvalue()


def weights_from_bytes(buf: bytes) -> tuple[list[int], dict[str, np.ndarray]]:
    try:
        magic, version, n_meta = struct.unpack_from("<4sII", buf)
        if magic != UAW_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {UAW_MAGIC!r}")
        if version != UAW_VERSION:
            raise FormatError(f"unsupported UAW version {version}")
        pos = 12
        metadata = list(struct.unpack_from(f"<{n_meta}I", buf, pos))
        pos += 4 * n_meta
        (n_tensors,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        tensors = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            name = buf[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", buf, pos)
            pos += 4 * rank
            count = int(np.prod(dims, dtype=np.int64))
            arr = np.frombuffer(buf, dtype="<f4", count=count, offset=pos).reshape(dims)
            pos += 4 * count
            tensors[name] = arr.copy()
    except FormatError:
        raise
    except (struct.error, ValueError) as exc:
        raise FormatError(f"truncated UAW1 file: {exc}") from None
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after UAW1 tensors")
    return metadata, tensors
