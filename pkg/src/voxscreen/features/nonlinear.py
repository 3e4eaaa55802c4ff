"""Recurrence period density entropy, detrended fluctuation analysis and pitch period entropy.

Parameterisations follow the original dysphonia measures in spirit but are
not bit-compatible with the reference toolboxes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio import AudioBuffer
from ..errors import InsufficientSignal, NoRecurrence
from ..pitch import F0Track


@dataclass(frozen=True)
class EmbedConfig:
    dimension: int = 4
    delay: int | None = None  # None: first zero of the autocorrelation
    max_delay: int = 50
    radius_factor: float = 0.12
    t_max: int = 1000
    max_excerpt_s: float = 5.0


@dataclass(frozen=True)
class DfaConfig:
    min_window: int = 50
    n_windows: int = 10
    max_excerpt_s: float = 5.0


@dataclass(frozen=True)
class PpeConfig:
    order: int = 2
    n_bins: int = 30
    f0_ref: float = 120.0
    min_frames: int = 32


def centred_excerpt(x: np.ndarray, max_len: int) -> np.ndarray:
    if len(x) <= max_len:
        return x
    start = (len(x) - max_len) // 2
    return x[start:start + max_len]


def first_zero_crossing(x: np.ndarray, cap: int) -> int:
    """Smallest lag at which the autocorrelation of ``x`` is not positive, capped."""
    y = x - x.mean()
    n = len(y)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(y, nfft)
    ac = np.fft.irfft(spec * np.conj(spec), nfft)[: cap + 1]
    nonpos = np.flatnonzero(ac[1:] <= 0)
    return int(nonpos[0] + 1) if nonpos.size else cap


def close_return_histogram(x: np.ndarray, dimension: int, delay: int, radius: float,
                           t_max: int, chunk: int = 8192) -> np.ndarray:
    """Histogram of first close-return times of the delay-embedded signal.

    For every embedded point the trajectory is followed until it leaves the
    ``radius`` ball, then until it first re-enters; the elapsed sample
    count (1..t_max) is tallied. ``counts[k]`` holds returns after k+1 samples.
    """
    span = (dimension - 1) * delay
    n_points = len(x) - span
    coords = [x[k * delay: k * delay + n_points] for k in range(dimension)]
    r2 = radius * radius
    counts = np.zeros(t_max, dtype=np.int64)
    for lo in range(0, n_points, chunk):
        hi = min(n_points, lo + chunk)
        inside = np.zeros((hi - lo, t_max), dtype=bool)
        for d in range(1, t_max + 1):
            stop = min(hi, n_points - d)
            if stop <= lo:
                break
            dist2 = np.zeros(stop - lo)
            for c in coords:
                diff = c[lo:stop] - c[lo + d:stop + d]
                dist2 += diff * diff
            inside[: stop - lo, d - 1] = dist2 <= r2
        outside = ~inside
        # lags past the end of the signal count as outside, so they never register a return
        has_left = outside.any(axis=1)
        left_at = np.argmax(outside, axis=1)
        after = np.arange(t_max)[None, :] > left_at[:, None]
        back = inside & after
        has_back = has_left & back.any(axis=1)
        back_at = np.argmax(back, axis=1)[has_back]
        counts += np.bincount(back_at, minlength=t_max)
    return counts


def normalized_entropy(counts: np.ndarray) -> float:
    """Shannon entropy of a histogram divided by the log of its bin count."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise NoRecurrence("empty histogram")
    c = counts[counts > 0]
    # ln(total) - sum(c ln c)/total equals -sum(p ln p) and is exact for a flat histogram
    entropy = np.log(total) - float((c * np.log(c)).sum()) / total
    return float(min(1.0, max(0.0, entropy / np.log(len(counts)))))


def rpde(buf: AudioBuffer, cfg: EmbedConfig | None = None) -> float:
    """Recurrence period density entropy in [0, 1]."""
    cfg = cfg or EmbedConfig()
    x = centred_excerpt(buf.samples, int(cfg.max_excerpt_s * buf.sample_rate))
    delay = cfg.delay or first_zero_crossing(x, cfg.max_delay)
    if len(x) - (cfg.dimension - 1) * delay <= cfg.t_max:
        raise InsufficientSignal("signal shorter than the recurrence horizon")
    std = float(np.std(x))
    if std == 0:
        raise NoRecurrence("constant signal")
    counts = close_return_histogram(x, cfg.dimension, delay, cfg.radius_factor * std, cfg.t_max)
    if counts.sum() == 0:
        raise NoRecurrence("no close returns within the horizon")
    return normalized_entropy(counts)


def dfa_fluctuations(x: np.ndarray, cfg: DfaConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Window sizes and RMS residuals of the linearly detrended profile."""
    cfg = cfg or DfaConfig()
    n = len(x)
    if n < 4 * cfg.min_window:
        raise InsufficientSignal(f"DFA needs at least {4 * cfg.min_window} samples")
    profile = np.cumsum(x - x.mean())
    sizes = np.unique(np.round(np.logspace(np.log10(cfg.min_window), np.log10(n / 4), cfg.n_windows)).astype(int))
    fluct = np.empty(len(sizes))
    for i, size in enumerate(sizes):
        k = n // size
        seg = profile[: k * size].reshape(k, size)
        t = np.arange(size, dtype=np.float64)
        t -= t.mean()
        slope = seg @ t / (t @ t)
        resid = seg - seg.mean(axis=1, keepdims=True) - slope[:, None] * t
        fluct[i] = np.sqrt(np.mean(resid * resid))
    return sizes, fluct


def dfa_alpha(x: np.ndarray, cfg: DfaConfig | None = None) -> float:
    """Least-squares slope of log F(L) against log L."""
    sizes, fluct = dfa_fluctuations(np.asarray(x, dtype=np.float64), cfg)
    fluct = np.maximum(fluct, np.finfo(float).tiny)
    return float(np.polyfit(np.log(sizes), np.log(fluct), 1)[0])


def normalize_alpha(alpha: float) -> float:
    return float(1.0 / (1.0 + np.exp(-alpha)))


def dfa(buf: AudioBuffer, cfg: DfaConfig | None = None) -> float:
    """Scaling exponent mapped into (0, 1) by the logistic function."""
    cfg = cfg or DfaConfig()
    x = centred_excerpt(buf.samples, int(cfg.max_excerpt_s * buf.sample_rate))
    return normalize_alpha(dfa_alpha(x, cfg))


def whitening_residual(s: np.ndarray, order: int = 2) -> np.ndarray:
    """Residual of an autocorrelation-method linear predictor fitted to mean-removed ``s``."""
    y = s - s.mean()
    n = len(y)
    r = np.array([y[: n - k] @ y[k:] for k in range(order + 1)]) / n
    if r[0] <= 0:
        return np.zeros(n - order)
    toeplitz = r[np.abs(np.subtract.outer(np.arange(order), np.arange(order)))]
    coef = np.linalg.solve(toeplitz, r[1:])
    pred = sum(coef[k] * y[order - 1 - k: n - 1 - k] for k in range(order))
    return y[order:] - pred


def ppe_from_f0(f0: np.ndarray, cfg: PpeConfig | None = None) -> float:
    cfg = cfg or PpeConfig()
    f0 = np.asarray(f0, dtype=np.float64)
    if f0.size < cfg.min_frames:
        raise InsufficientSignal(f"PPE needs at least {cfg.min_frames} voiced frames, got {f0.size}")
    semitones = 12.0 * np.log2(f0 / cfg.f0_ref)
    if np.std(semitones) < 1e-9:
        return 0.0
    resid = whitening_residual(semitones, cfg.order)
    sigma = float(np.std(resid))
    if sigma < 1e-12:
        return 0.0
    edges = np.linspace(-5 * sigma, 5 * sigma, cfg.n_bins + 1)
    counts, _ = np.histogram(np.clip(resid, edges[0], edges[-1]), bins=edges)
    return normalized_entropy(counts)


def ppe(track: F0Track, cfg: PpeConfig | None = None) -> float:
    """Pitch period entropy of the voiced F0 contour, in [0, 1]."""
    return ppe_from_f0(track.voiced_f0, cfg)
