"""Synthetic voice cohorts with programmed jitter, shimmer and noise."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, write_wav
from .errors import InvalidArgument

N_HARMONICS = 5
PEAK_LEVEL = 0.5

DEFAULT_COHORT = {
    "sample_rate": 16000,
    "duration_s": 1.5,
    "pad_s": 0.2,
    "classes": {
        "PD": {"n": 30, "f0_hz": [95.0, 150.0], "jitter": [0.015, 0.035],
               "shimmer": [0.05, 0.10], "snr_db": [12.0, 20.0]},
        "non-PD": {"n": 30, "f0_hz": [130.0, 210.0], "jitter": [0.002, 0.008],
                   "shimmer": [0.01, 0.03], "snr_db": [18.0, 30.0]},
    },
    "meta": {"male_fraction": 0.5, "age_years": [35, 85], "lab_fraction": 0.1, "country": "US"},
}


def local_perturbation(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=np.float64)
    return float(np.mean(np.abs(np.diff(values))) / np.mean(values))


def perturbed_sequence(n: int, level: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean sequence whose expected local perturbation equals ``level``.

    For iid Gaussian deviations of std s, E|d_i - d_{i-1}| = 2 s / sqrt(pi).
    """
    if level <= 0:
        return np.ones(n)
    sigma = level * np.sqrt(np.pi) / 2.0
    return 1.0 + sigma * np.clip(rng.standard_normal(n), -3.0, 3.0)


@dataclass
class Voice:
    samples: np.ndarray
    sample_rate: int
    periods: np.ndarray
    amplitudes: np.ndarray

    @property
    def jitter(self) -> float:
        return local_perturbation(self.periods)

    @property
    def shimmer(self) -> float:
        return local_perturbation(self.amplitudes)

    def buffer(self, source_id: str = "") -> AudioBuffer:
        return AudioBuffer(self.samples, self.sample_rate, source_id)


def pulse_voice(f0: float, jitter: float, shimmer: float, duration: float, rng: np.random.Generator,
                sample_rate: int = 16000, snr_db: float | None = None, pad_s: float = 0.0) -> Voice:
    """Harmonic pulse train with one dominant positive peak per cycle.

    Cycle peaks sit at the cumulative sum of the programmed periods, and the
    amplitude envelope passes through each cycle's programmed amplitude
    with zero slope at the peak, so peak picking recovers both sequences.
    White noise is added at ``snr_db`` relative to the voiced power;
    ``pad_s`` seconds of noise-only (or silent) lead-in/out are appended.
    """
    if f0 <= 0 or duration <= 0:
        raise InvalidArgument("f0 and duration must be positive")
    t0 = 1.0 / f0
    n_cycles = int(np.ceil(duration / t0)) + 2
    periods = t0 * perturbed_sequence(n_cycles, jitter, rng)
    amps = perturbed_sequence(n_cycles + 1, shimmer, rng)
    peaks = np.concatenate([[0.5 * t0], 0.5 * t0 + np.cumsum(periods)])
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    i = np.clip(np.searchsorted(peaks, t, side="right") - 1, 0, n_cycles - 1)
    frac = (t - peaks[i]) / periods[i]
    # before the first peak extrapolate with the first period
    frac = np.where(t < peaks[0], (t - peaks[0]) / periods[0], frac)
    phase = 2.0 * np.pi * frac
    k = np.arange(1, N_HARMONICS + 1)
    wave = (np.cos(np.outer(phase, k)) / k).sum(axis=1) / (1.0 / k).sum()
    blend = 0.5 * (1.0 - np.cos(np.pi * np.clip(frac, 0.0, 1.0)))
    envelope = amps[i] + (amps[i + 1] - amps[i]) * blend
    voiced = envelope * wave
    last = int(np.searchsorted(peaks, duration)) - 1
    used = slice(0, max(last, 1))
    noise_std = 0.0
    if snr_db is not None:
        noise_std = np.sqrt(np.mean(voiced ** 2) / 10.0 ** (snr_db / 10.0))
        voiced = voiced + noise_std * rng.standard_normal(n)
    pad = int(round(pad_s * sample_rate))
    if pad:
        lead = noise_std * rng.standard_normal(pad)
        tail = noise_std * rng.standard_normal(pad)
        voiced = np.concatenate([lead, voiced, tail])
    gain = PEAK_LEVEL / np.max(np.abs(voiced))
    return Voice(voiced * gain, sample_rate, periods[used], amps[: used.stop + 1] * gain)


def _range(spec: dict, key: str) -> tuple[float, float]:
    value = spec[key]
    lo, hi = (value, value) if np.isscalar(value) else (float(value[0]), float(value[1]))
    if hi < lo:
        raise InvalidArgument(f"{key}: range upper bound below lower bound")
    return lo, hi


def validate_cohort(spec: dict) -> None:
    classes = spec.get("classes")
    if not isinstance(classes, dict) or not classes:
        raise InvalidArgument("cohort spec needs a non-empty 'classes' mapping")
    for name, cls in classes.items():
        if name not in ("PD", "non-PD"):
            raise InvalidArgument(f"unknown class {name!r}; expected 'PD' or 'non-PD'")
        n = cls.get("n")
        if not isinstance(n, int) or n < 1:
            raise InvalidArgument(f"class {name!r}: n must be a positive integer")
        for key in ("f0_hz", "jitter", "shimmer"):
            if key not in cls:
                raise InvalidArgument(f"class {name!r}: missing {key!r}")
            lo, _ = _range(cls, key)
            if lo < 0 or (key == "f0_hz" and lo <= 0):
                raise InvalidArgument(f"class {name!r}: {key} must be positive")
    if spec.get("duration_s", 1.0) <= 0 or spec.get("sample_rate", 16000) <= 0:
        raise InvalidArgument("duration_s and sample_rate must be positive")


def generate_cohort(spec: dict, out_dir: str | Path, seed: int = 42) -> list[dict]:
    """Write WAVs, ``manifest.csv`` and ``expected.csv`` for a cohort spec.

    Returns the expectation rows (one dict per recording).
    """
    validate_cohort(spec)
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wav"
    wav_dir.mkdir(parents=True, exist_ok=True)
    rate = int(spec.get("sample_rate", 16000))
    duration = float(spec.get("duration_s", 1.5))
    pad = float(spec.get("pad_s", 0.0))
    meta_spec = {**DEFAULT_COHORT["meta"], **spec.get("meta", {})}
    rng = np.random.default_rng(seed)
    manifest, expected = [], []
    for name in sorted(spec["classes"]):
        cls = spec["classes"][name]
        for j in range(cls["n"]):
            rid = f"{'pd' if name == 'PD' else 'hc'}{j:03d}"
            f0 = rng.uniform(*_range(cls, "f0_hz"))
            jit = rng.uniform(*_range(cls, "jitter"))
            shim = rng.uniform(*_range(cls, "shimmer"))
            snr = rng.uniform(*_range(cls, "snr_db")) if cls.get("snr_db") is not None else None
            voice = pulse_voice(f0, jit, shim, duration, rng, rate, snr, pad)
            write_wav(wav_dir / f"{rid}.wav", voice.buffer(rid))
            age_lo, age_hi = meta_spec["age_years"]
            manifest.append({
                "id": rid, "path": f"wav/{rid}.wav", "label": name,
                "gender": "male" if rng.random() < meta_spec["male_fraction"] else "female",
                "age": int(rng.integers(age_lo, age_hi + 1)),
                "environment": "lab" if rng.random() < meta_spec["lab_fraction"] else "home",
                "country": meta_spec["country"],
            })
            expected.append({
                "id": rid, "label": name, "f0_hz": repr(f0),
                "jitter_target": repr(jit), "jitter_realized": repr(voice.jitter),
                "shimmer_target": repr(shim), "shimmer_realized": repr(voice.shimmer),
                "snr_db": "" if snr is None else repr(snr),
                "hnr_expected_db": "" if snr is None else repr(snr),
            })
    for fname, rows in (("manifest.csv", manifest), ("expected.csv", expected)):
        with open(out_dir / fname, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    (out_dir / "cohort.json").write_text(
        json.dumps({"seed": seed, "spec": spec}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return expected
