"""Pitch statistics, jitter/shimmer variants, MFCC summaries and relative band power."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from ..audio import AudioBuffer
from ..errors import InsufficientPeriods, InsufficientSignal, NoVoicedSpeech
from ..pitch import F0Track, PeriodMarks

MISSING = float("nan")

BAND_EDGES_HZ = (0.0, 500.0, 1000.0, 2000.0, 4000.0)


def pitch_stats(track: F0Track) -> dict[str, float]:
    """Mean, median and population standard deviation of voiced F0 (Hz)."""
    f0 = track.voiced_f0
    if f0.size == 0:
        raise NoVoicedSpeech("no voiced frames")
    return {
        "MeanPitch": float(np.mean(f0)),
        "MedianPitch": float(np.median(f0)),
        "StdDevPitch": float(np.std(f0)),
    }


def _centered_terms(values: np.ndarray, region: np.ndarray, half: int) -> np.ndarray:
    """|v_i - mean(v_{i-half..i+half})| for every i whose window stays inside one region."""
    n = values.shape[0]
    width = 2 * half + 1
    if n < width:
        return np.empty(0)
    win = np.lib.stride_tricks.sliding_window_view(values, width)
    reg = np.lib.stride_tricks.sliding_window_view(region, width)
    ok = np.all(reg == reg[:, :1], axis=1)
    centre = values[half:n - half]
    return np.abs(centre - win.mean(axis=1))[ok]


def _first_diffs(values: np.ndarray, region: np.ndarray) -> np.ndarray:
    same = region[1:] == region[:-1]
    return np.diff(values)[same]


def _second_diffs(values: np.ndarray, region: np.ndarray) -> np.ndarray:
    same = (region[2:] == region[1:-1]) & (region[1:-1] == region[:-2])
    return (values[2:] - 2.0 * values[1:-1] + values[:-2])[same]


def _mean_or_missing(terms: np.ndarray, scale: float) -> float:
    return float(np.mean(terms) / scale) if terms.size else MISSING


def jitter_features(marks: PeriodMarks) -> dict[str, float]:
    """Period perturbation measures.

    RAP uses the 3-point centred average including the period itself, so
    ``DdpJitter == 3 * RapJitter`` holds algebraically; the median variant
    divides by the median period.
    """
    t = marks.periods
    if marks.count < 5:
        raise InsufficientPeriods(f"need at least 5 periods, got {marks.count}")
    reg = marks.region
    mean_t = float(np.mean(t))
    d1 = np.abs(_first_diffs(t, reg))
    d2 = np.abs(_second_diffs(t, reg))
    local_abs = float(np.mean(d1)) if d1.size else MISSING
    local = local_abs / mean_t
    return {
        "MeanJitter": local,
        "MedianJitter": float(np.median(d1) / np.median(t)) if d1.size else MISSING,
        "LocalJitter": local,
        "LocalAbsoluteJitter": local_abs,
        "RapJitter": _mean_or_missing(_centered_terms(t, reg, 1), mean_t),
        "Ppq5Jitter": _mean_or_missing(_centered_terms(t, reg, 2), mean_t),
        "DdpJitter": _mean_or_missing(d2, mean_t),
    }


def shimmer_features(marks: PeriodMarks) -> dict[str, float]:
    """Amplitude perturbation measures; Apq11Shimmer is missing with fewer than 11 cycles."""
    a = marks.amplitudes
    if marks.count < 5:
        raise InsufficientPeriods(f"need at least 5 periods, got {marks.count}")
    reg = marks.region
    mean_a = float(np.mean(a))
    d1 = np.abs(_first_diffs(a, reg))
    d2 = np.abs(_second_diffs(a, reg))
    local = _mean_or_missing(d1, mean_a)
    same = reg[1:] == reg[:-1]
    prev, cur = a[:-1][same], a[1:][same]
    pos = (prev > 0) & (cur > 0)
    db = np.abs(20.0 * np.log10(cur[pos] / prev[pos]))
    median_a = float(np.median(a))
    return {
        "MeanShimmer": local,
        "MedianShimmer": float(np.median(d1) / median_a) if d1.size and median_a > 0 else MISSING,
        "LocalShimmer": local,
        "LocaldbShimmer": float(np.mean(db)) if db.size else MISSING,
        "Apq3Shimmer": _mean_or_missing(_centered_terms(a, reg, 1), mean_a),
        "Apq5Shimmer": _mean_or_missing(_centered_terms(a, reg, 2), mean_a),
        "Apq11Shimmer": _mean_or_missing(_centered_terms(a, reg, 5), mean_a),
        "DdaShimmer": _mean_or_missing(d2, mean_a),
    }


@dataclass(frozen=True)
class MfccConfig:
    n_mfcc: int = 13
    n_mels: int = 26
    frame_s: float = 0.025
    hop_s: float = 0.010
    n_fft: int = 512
    preemphasis: float = 0.97
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = 1e-10


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int, fmin: float, fmax: float) -> np.ndarray:
    """Triangular filters, equally spaced on the mel scale, evaluated at rfft bin frequencies."""
    fmax = min(fmax, sample_rate / 2.0)
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (centre - lower)
    falling = (upper - freqs) / (upper - centre)
    return np.maximum(0.0, np.minimum(rising, falling))


def _frames(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(x, frame)[::hop]


def mfcc(buf: AudioBuffer, cfg: MfccConfig | None = None) -> np.ndarray:
    """Framewise MFCCs, shape (n_frames, n_mfcc)."""
    cfg = cfg or MfccConfig()
    fs = buf.sample_rate
    frame = int(round(cfg.frame_s * fs))
    hop = int(round(cfg.hop_s * fs))
    x = buf.samples
    if len(x) < frame + 2 * hop:
        raise InsufficientSignal("MFCC needs at least 3 frames")
    y = np.concatenate([x[:1], x[1:] - cfg.preemphasis * x[:-1]])
    frames = _frames(y, frame, hop) * np.hanning(frame + 2)[1:-1]
    n_fft = max(cfg.n_fft, frame)
    power = np.abs(np.fft.rfft(frames, n_fft, axis=1)) ** 2
    fb = mel_filterbank(cfg.n_mels, n_fft, fs, cfg.fmin, cfg.fmax)
    log_e = np.log(np.maximum(power @ fb.T, cfg.log_floor))
    return dct(log_e, type=2, norm="ortho", axis=1)[:, : cfg.n_mfcc]


def mfcc_features(buf: AudioBuffer, cfg: MfccConfig | None = None) -> dict[str, float]:
    """Mean and mean absolute frame-to-frame change of each coefficient."""
    c = mfcc(buf, cfg)
    mean = c.mean(axis=0)
    variation = np.abs(np.diff(c, axis=0)).mean(axis=0)
    out = {f"MeanMFCC{k}": float(v) for k, v in enumerate(mean)}
    out.update({f"VariationMFCC{k}": float(v) for k, v in enumerate(variation)})
    return out


def rel_band_power(buf: AudioBuffer, frame_s: float = 0.025, hop_s: float = 0.010) -> np.ndarray:
    """Median per-band power over frames in 0-500-1000-2000-4000 Hz, normalised to sum 1."""
    fs = buf.sample_rate
    frame = int(round(frame_s * fs))
    hop = int(round(hop_s * fs))
    if len(buf) < frame:
        raise InsufficientSignal("relative band power needs at least one 25 ms frame")
    frames = _frames(buf.samples, frame, hop) * np.hanning(frame + 2)[1:-1]
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    freqs = np.fft.rfftfreq(frame, 1.0 / fs)
    bands = []
    for i, (lo, hi) in enumerate(zip(BAND_EDGES_HZ[:-1], BAND_EDGES_HZ[1:])):
        last = i == len(BAND_EDGES_HZ) - 2
        sel = (freqs >= lo) & ((freqs <= hi) if last else (freqs < hi))
        bands.append(np.median(power[:, sel].sum(axis=1)))
    bands = np.asarray(bands)
    total = bands.sum()
    if total <= 0:
        return np.full(4, 0.25)
    return bands / total
