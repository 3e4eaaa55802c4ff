"""WAV input/output, resampling and energy-based endpoint trimming."""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from math import gcd
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import EmptyAudio, InvalidArgument, ParseError, UnsupportedFormat

logger = logging.getLogger(__name__)

_PCM = 1
_FLOAT = 3
_EXTENSIBLE = 0xFFFE

#: Canonical analysis rate; band and filterbank definitions assume it.
ANALYSIS_RATE = 16000


@dataclass(frozen=True)
class AudioBuffer:
    """Mono signal in [-1, 1] with its sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidArgument("samples must be one-dimensional")
        if samples.size == 0:
            raise InvalidArgument("samples must be non-empty")
        if self.sample_rate <= 0:
            raise InvalidArgument(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise InvalidArgument("samples contain NaN or infinite values")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate, self.source_id)


@dataclass(frozen=True)
class TrimBounds:
    start_index: int
    end_index: int
    speech_found: bool = True

    def to_dict(self) -> dict:
        return {"start_index": self.start_index, "end_index": self.end_index,
                "speech_found": self.speech_found}


@dataclass(frozen=True)
class VadConfig:
    frame_s: float = 0.030
    hop_s: float = 0.010
    relative_threshold: float = 0.05
    absolute_floor: float = 1e-4


def _parse_fmt(body: bytes) -> tuple[int, int, int, int]:
    if len(body) < 16:
        raise ParseError("fmt chunk too short")
    fmt_tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if fmt_tag == _EXTENSIBLE:
        if len(body) < 26:
            raise ParseError("truncated WAVE_FORMAT_EXTENSIBLE header")
        fmt_tag = struct.unpack("<H", body[24:26])[0]
    if channels == 0 or rate == 0:
        raise ParseError("fmt chunk declares zero channels or zero sample rate")
    return fmt_tag, channels, rate, bits


def _decode(raw: bytes, fmt_tag: int, channels: int, bits: int) -> np.ndarray:
    if fmt_tag == _PCM and bits == 16:
        data = np.frombuffer(raw[: len(raw) - len(raw) % 2], dtype="<i2").astype(np.float64) / 32768.0
    elif fmt_tag == _PCM and bits == 24:
        usable = len(raw) - len(raw) % 3
        b = np.frombuffer(raw[:usable], dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        data = ints.astype(np.float64) / float(1 << 23)
    elif fmt_tag == _FLOAT and bits == 32:
        data = np.frombuffer(raw[: len(raw) - len(raw) % 4], dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedFormat(f"unsupported codec: format tag {fmt_tag}, {bits} bits")
    frames = data.shape[0] // channels
    if frames == 0:
        raise EmptyAudio("data chunk holds no complete frame")
    data = data[: frames * channels].reshape(frames, channels)
    return data.mean(axis=1)


def read_wav(path: str | Path) -> AudioBuffer:
    """Read a RIFF/WAVE file (PCM16, PCM24 or float32) as a mono buffer."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise ParseError(f"{path}: not a little-endian RIFF/WAVE file")
    pos = 12
    fmt = None
    raw = None
    while pos + 8 <= len(blob):
        chunk_id = blob[pos:pos + 4]
        size = struct.unpack("<I", blob[pos + 4:pos + 8])[0]
        body = blob[pos + 8:pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(body)
        elif chunk_id == b"data":
            raw = body
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise ParseError(f"{path}: missing fmt chunk")
    if raw is None:
        raise ParseError(f"{path}: missing data chunk")
    fmt_tag, channels, rate, bits = fmt
    if len(raw) == 0:
        raise EmptyAudio(f"{path}: zero-length data chunk")
    samples = _decode(raw, fmt_tag, channels, bits)
    samples = np.nan_to_num(samples, nan=0.0, posinf=1.0, neginf=-1.0)
    return AudioBuffer(samples, rate, path.stem)


def write_wav(path: str | Path, buf: AudioBuffer, sample_format: str = "pcm16") -> None:
    """Write a mono WAV file; ``sample_format`` is ``pcm16``, ``pcm24`` or ``float32``."""
    x = buf.samples
    if sample_format == "pcm16":
        tag, bits = _PCM, 16
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
    elif sample_format == "pcm24":
        tag, bits = _PCM, 24
        ints = np.clip(np.round(x * (1 << 23)), -(1 << 23), (1 << 23) - 1).astype(np.int32)
        data = ints.astype("<i4").view(np.uint8).reshape(-1, 4)[:, :3].tobytes()
    elif sample_format == "float32":
        tag, bits = _FLOAT, 32
        data = x.astype("<f4").tobytes()
    else:
        raise InvalidArgument(f"unknown sample format {sample_format!r}")
    block = bits // 8
    fmt = struct.pack("<HHIIHH", tag, 1, buf.sample_rate, buf.sample_rate * block, block, bits)
    pad = b"\x00" if len(data) & 1 else b""
    riff_size = 4 + (8 + len(fmt)) + (8 + len(data) + len(pad))
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", riff_size) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
        fh.write(b"data" + struct.pack("<I", len(data)) + data + pad)


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited polyphase resampling (Kaiser-windowed sinc FIR)."""
    if target_rate <= 0:
        raise InvalidArgument(f"target_rate must be positive, got {target_rate}")
    target_rate = int(target_rate)
    if target_rate == buf.sample_rate:
        return buf
    g = gcd(target_rate, buf.sample_rate)
    up, down = target_rate // g, buf.sample_rate // g
    out = resample_poly(buf.samples, up, down, padtype="line")
    return AudioBuffer(out, target_rate, buf.source_id)


def frame_rms(samples: np.ndarray, frame: int, hop: int) -> np.ndarray:
    if samples.shape[0] < frame:
        return np.empty(0)
    frames = np.lib.stride_tricks.sliding_window_view(samples, frame)[::hop]
    return np.sqrt(np.mean(frames * frames, axis=1))


def trim_endpoints(buf: AudioBuffer, cfg: VadConfig | None = None) -> tuple[AudioBuffer, TrimBounds]:
    """Cut leading and trailing low-energy audio.

    Keeps the span from the first to the last frame whose RMS exceeds
    ``max(absolute_floor, relative_threshold * peak_rms)``. Inputs with no
    such frame are returned unchanged with ``speech_found=False``.
    """
    cfg = cfg or VadConfig()
    frame = max(1, int(round(cfg.frame_s * buf.sample_rate)))
    hop = max(1, int(round(cfg.hop_s * buf.sample_rate)))
    n = len(buf)
    rms = frame_rms(buf.samples, frame, hop)
    if rms.size == 0:
        logger.warning("%s: shorter than one VAD frame, not trimmed", buf.source_id or "buffer")
        return buf, TrimBounds(0, n, False)
    threshold = max(cfg.absolute_floor, cfg.relative_threshold * float(rms.max()))
    active = np.flatnonzero(rms > threshold)
    if active.size == 0:
        logger.warning("%s: no frame above VAD threshold, not trimmed", buf.source_id or "buffer")
        return buf, TrimBounds(0, n, False)
    start = int(active[0]) * hop
    end = min(n, int(active[-1]) * hop + frame)
    return buf.with_samples(buf.samples[start:end]), TrimBounds(start, end, True)
