"""Autocorrelation pitch tracking, glottal-cycle marking and HNR."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .audio import AudioBuffer
from .errors import InsufficientSignal, NoVoicedSpeech


@dataclass(frozen=True)
class PitchConfig:
    """Pitch tracker settings.

    The defaults cover adult male and female speech. ``octave_cost``
    penalises long-lag candidates per octave; on top of that a candidate
    at a half or third of the winning lag replaces it when its strength is
    at least ``submultiple_ratio`` of the winner's (period-doubling guard).
    """

    f0_floor: float = 60.0
    f0_ceil: float = 400.0
    voicing_threshold: float = 0.45
    window_s: float = 0.040
    hop_s: float = 0.010
    octave_cost: float = 0.01
    submultiple_ratio: float = 0.9
    mark_search: float = 0.25


@dataclass(frozen=True)
class F0Track:
    times: np.ndarray
    f0: np.ndarray  # NaN marks unvoiced frames
    strength: np.ndarray
    hop: float
    window: float

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.f0)

    @property
    def voiced_f0(self) -> np.ndarray:
        return self.f0[self.voiced]

    def __len__(self):
        return self.times.shape[0]


@dataclass(frozen=True)
class PeriodMarks:
    """Per-cycle periods (s) and peak amplitudes.

    ``region`` labels the voiced region each cycle came from; perturbation
    measures never combine cycles across regions.
    """

    periods: np.ndarray
    amplitudes: np.ndarray
    region: np.ndarray | None = None
    positions: np.ndarray | None = None

    def __post_init__(self):
        periods = np.asarray(self.periods, dtype=np.float64)
        amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        if periods.shape != amplitudes.shape or periods.ndim != 1:
            raise ValueError("periods and amplitudes must be 1-D and equally long")
        region = np.zeros(periods.shape[0], dtype=np.int64) if self.region is None \
            else np.asarray(self.region, dtype=np.int64)
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "region", region)

    @property
    def count(self) -> int:
        return self.periods.shape[0]

    def __len__(self):
        return self.count


def _lag_range(fs: int, cfg: PitchConfig) -> tuple[int, int]:
    return max(2, int(np.floor(fs / cfg.f0_ceil))), int(np.ceil(fs / cfg.f0_floor))


def normalized_autocorrelation(frames: np.ndarray, max_lag: int) -> np.ndarray:
    """NCCF of each frame with itself: r[f, k] for lags 0..max_lag.

    Lag k correlates the first W-k samples with the last W-k samples and
    normalises by both segment energies, so r is gain-invariant and 1 for
    an exactly periodic frame at its period.
    """
    width = frames.shape[1]
    nfft = 1 << int(np.ceil(np.log2(2 * width)))
    spec = np.fft.rfft(frames, nfft, axis=1)
    ac = np.fft.irfft(spec * np.conj(spec), nfft, axis=1)[:, : max_lag + 1]
    cs = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(frames * frames, axis=1)], axis=1)
    lags = np.arange(max_lag + 1)
    head = cs[:, width - lags]
    tail = cs[:, [width]] - cs[:, lags]
    denom = np.sqrt(head * tail)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 1e-20, ac / denom, 0.0)
    return np.clip(r, -1.0, 1.0)


def _pick_peak(r: np.ndarray, lo: int, hi: int, fs: int, cfg: PitchConfig) -> tuple[float, float]:
    """Best (lag, strength) in r[lo..hi], or (nan, 0) when no local maximum exists."""
    seg = r[lo - 1: hi + 2]
    mid = seg[1:-1]
    is_peak = (mid > seg[:-2]) & (mid >= seg[2:]) & (mid > 0)
    idx = np.flatnonzero(is_peak)
    if idx.size == 0:
        return np.nan, 0.0
    a, b, c = seg[idx], seg[idx + 1], seg[idx + 2]
    curv = a - 2 * b + c
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = np.where(curv < 0, 0.5 * (a - c) / curv, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    lag = lo + idx + delta
    strength = np.minimum(b - 0.25 * (a - c) * delta, 1.0)
    score = strength - cfg.octave_cost * np.log2(cfg.f0_floor * lag / fs)
    best = int(np.argmax(score))
    for k in (3, 2):
        near = np.abs(lag * k - lag[best]) <= 0.1 * lag[best]
        near &= strength >= cfg.submultiple_ratio * strength[best]
        if near.any():
            best = int(np.flatnonzero(near)[np.argmax(strength[near])])
            break
    return float(lag[best]), float(strength[best])


def estimate_f0(buf: AudioBuffer, cfg: PitchConfig | None = None) -> F0Track:
    """Framewise F0 from the normalised autocorrelation peak.

    Frames whose peak strength falls below ``voicing_threshold`` (or whose
    F0 lands outside the floor/ceiling range) are unvoiced (NaN).
    """
    cfg = cfg or PitchConfig()
    fs = buf.sample_rate
    x = buf.samples
    if len(x) < 2.0 / cfg.f0_floor * fs:
        raise InsufficientSignal(
            f"need at least {2.0 / cfg.f0_floor:.3f} s of audio, got {buf.duration:.3f} s")
    width = min(len(x), int(round(cfg.window_s * fs)))
    hop = max(1, int(round(cfg.hop_s * fs)))
    lo, hi = _lag_range(fs, cfg)
    hi = min(hi, width - 3)
    frames = np.lib.stride_tricks.sliding_window_view(x, width)[::hop]
    r = normalized_autocorrelation(frames, hi + 1)
    n_frames = frames.shape[0]
    f0 = np.full(n_frames, np.nan)
    strength = np.zeros(n_frames)
    for i in range(n_frames):
        lag, s = _pick_peak(r[i], lo, hi, fs, cfg)
        strength[i] = max(s, 0.0)
        if np.isnan(lag) or s < cfg.voicing_threshold:
            continue
        freq = fs / lag
        if cfg.f0_floor <= freq <= cfg.f0_ceil:
            f0[i] = freq
    _fix_octave_jumps(r, f0, strength, lo, hi, fs, cfg)
    times = (np.arange(n_frames) * hop + width / 2.0) / fs
    return F0Track(times, f0, strength, hop / fs, width / fs)


_JUMP_RATIOS = (1 / 6, 1 / 5, 1 / 4, 1 / 3, 1 / 2, 2.0, 3.0)


def _fix_octave_jumps(r, f0, strength, lo, hi, fs, cfg, tolerance=0.15):
    """Re-pick frames whose F0 jumped to a sub-multiple or multiple of their voiced run.

    Each run of voiced frames has a median F0; frames near 1/k (k = 2..6),
    2 or 3 times it take the strongest NCCF peak within 20% of the median lag
    instead, provided that peak is itself voiced.
    """
    voiced = ~np.isnan(f0)
    v = np.concatenate([[False], voiced, [False]]).astype(np.int8)
    starts = np.flatnonzero(np.diff(v) == 1)
    stops = np.flatnonzero(np.diff(v) == -1)
    for a, b in zip(starts, stops):
        ref = float(np.median(f0[a:b]))
        ref_lag = fs / ref
        for i in range(a, b):
            ratio = f0[i] / ref
            if not any(abs(ratio - m) <= tolerance * m for m in _JUMP_RATIOS):
                continue
            l0 = max(lo, int(np.floor(0.8 * ref_lag)))
            l1 = min(hi, int(np.ceil(1.2 * ref_lag)))
            if l1 <= l0:
                continue
            lag, s = _pick_peak(r[i], l0, l1, fs, replace(cfg, octave_cost=0.0, submultiple_ratio=2.0))
            if not np.isnan(lag) and s >= cfg.voicing_threshold and cfg.f0_floor <= fs / lag <= cfg.f0_ceil:
                f0[i], strength[i] = fs / lag, s


def voiced_regions(track: F0Track, min_frames: int = 3) -> list[tuple[int, int]]:
    """Runs [first, last] of consecutive voiced frames at least ``min_frames`` long."""
    v = np.concatenate([[False], track.voiced, [False]]).astype(np.int8)
    edges = np.diff(v)
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    return [(int(a), int(b)) for a, b in zip(starts, stops) if b - a + 1 >= min_frames]


def _refine(y: np.ndarray, k: int) -> float:
    if 0 < k < len(y) - 1:
        a, b, c = y[k - 1], y[k], y[k + 1]
        curv = a - 2 * b + c
        if curv < 0:
            return k + float(np.clip(0.5 * (a - c) / curv, -0.5, 0.5))
    return float(k)


def extract_period_marks(buf: AudioBuffer, track: F0Track, cfg: PitchConfig | None = None) -> PeriodMarks:
    """Place one mark per glottal cycle by peak picking guided by the F0 track.

    Within each voiced region the first mark is the largest peak of the
    nominal period that starts where the signal first reaches half its
    peak level; each next mark is the largest peak within
    ``mark_search`` periods of the predicted position. Mark positions are
    refined to sub-sample precision by parabolic interpolation. Each cycle
    is centred on its mark and spans half a period either side; its
    amplitude is the largest sample of the dominant polarity inside that
    span (the cycle's peak, unaffected by the neighbouring trough).
    """
    cfg = cfg or PitchConfig()
    fs = buf.sample_rate
    x = buf.samples
    regions = voiced_regions(track)
    if not regions:
        raise NoVoicedSpeech("no voiced region of at least 3 frames")
    half_win = track.window * fs / 2.0
    periods, amps, labels, positions = [], [], [], []
    for label, (first, last) in enumerate(regions):
        start = max(0, int(np.floor(track.times[first] * fs - half_win)))
        stop = min(len(x), int(np.ceil(track.times[last] * fs + half_win)))
        seg = x[start:stop]
        if seg.size < 3:
            continue
        sign = 1.0 if seg.max() >= -seg.min() else -1.0
        y = sign * seg
        frame_pos = track.times[first:last + 1] * fs - start
        frame_f0 = track.f0[first:last + 1]

        def local_period(pos: float) -> float:
            return fs / float(np.interp(pos, frame_pos, frame_f0))

        # the region padding may start in silence: begin at the first substantial peak
        onset = int(np.argmax(y >= 0.5 * y.max()))
        t0 = local_period(float(onset))
        k = onset + int(np.argmax(y[onset: onset + max(1, int(np.ceil(t0)))]))
        marks = [_refine(y, k)]
        heights = [y[k]]
        while True:
            period = local_period(marks[-1])
            centre = marks[-1] + period
            lo = int(np.ceil(centre - cfg.mark_search * period))
            hi = int(np.floor(centre + cfg.mark_search * period))
            if hi >= len(y) - 1:
                break
            k = lo + int(np.argmax(y[lo:hi + 1]))
            # the region edge reaches into silence: stop once peaks collapse
            if y[k] <= 0 or y[k] < 0.25 * np.median(heights[-5:]):
                break
            marks.append(_refine(y, k))
            heights.append(y[k])
        if len(marks) < 2:
            continue
        marks_arr = np.asarray(marks)
        gaps = np.diff(marks_arr)
        lefts = np.concatenate([[gaps[0]], gaps])[:-1]
        periods.append(gaps / fs)
        amps.append(np.array([
            y[max(0, int(np.ceil(m - 0.5 * g_left))): int(np.floor(m + 0.5 * g_right)) + 1].max()
            for m, g_left, g_right in zip(marks_arr[:-1], lefts, gaps)]))
        labels.append(np.full(len(marks) - 1, label))
        positions.append((marks_arr[:-1] + start) / fs)
    if not periods:
        raise NoVoicedSpeech("voiced regions too short to hold a full cycle")
    return PeriodMarks(np.concatenate(periods), np.concatenate(amps),
                       np.concatenate(labels), np.concatenate(positions))


def hnr_from_strength(strength: np.ndarray) -> np.ndarray:
    r = np.clip(strength, 1e-6, 1 - 1e-6)
    return 10.0 * np.log10(r / (1.0 - r))


def hnr(buf: AudioBuffer, cfg: PitchConfig | None = None, track: F0Track | None = None) -> float:
    """Mean per-frame harmonics-to-noise ratio (dB) over voiced frames."""
    track = track if track is not None else estimate_f0(buf, cfg)
    if not track.voiced.any():
        raise NoVoicedSpeech("no voiced frames")
    return float(np.mean(hnr_from_strength(track.strength[track.voiced])))
