"""Per-recording feature extraction: WAV in, named feature values out."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..audio import ANALYSIS_RATE, AudioBuffer, TrimBounds, VadConfig, read_wav, resample, trim_endpoints
from ..errors import InsufficientPeriods, InsufficientSignal, NoRecurrence, NoVoicedSpeech
from ..pitch import PitchConfig, estimate_f0, extract_period_marks, hnr
from .classic import MISSING, MfccConfig, jitter_features, mfcc_features, pitch_stats, rel_band_power, shimmer_features
from .names import ALL_FEATURES, CANONICAL_FEATURES, JITTER, SHIMMER
from .nonlinear import DfaConfig, EmbedConfig, PpeConfig, dfa, ppe, rpde

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractionConfig:
    sample_rate: int = ANALYSIS_RATE
    vad: VadConfig = field(default_factory=VadConfig)
    pitch: PitchConfig = field(default_factory=PitchConfig)
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    dfa: DfaConfig = field(default_factory=DfaConfig)
    ppe: PpeConfig = field(default_factory=PpeConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExtractionConfig":
        d = dict(d or {})
        parts = {"vad": VadConfig, "pitch": PitchConfig, "mfcc": MfccConfig,
                 "embed": EmbedConfig, "dfa": DfaConfig, "ppe": PpeConfig}
        kwargs = {k: parts[k](**d.pop(k)) for k in list(d) if k in parts}
        return cls(**kwargs, **d)


@dataclass
class RecordingFeatures:
    values: dict[str, float]
    bounds: TrimBounds

    def row(self, names=CANONICAL_FEATURES) -> np.ndarray:
        return np.array([self.values.get(n, MISSING) for n in names], dtype=np.float64)


def extract_buffer(buf: AudioBuffer, cfg: ExtractionConfig | None = None) -> RecordingFeatures:
    """Compute every feature for one buffer.

    A recording with no voiced speech fails (NoVoicedSpeech). Perturbation,
    PPE and RPDE failures on short or odd recordings leave missing values
    instead of failing the whole recording.
    """
    cfg = cfg or ExtractionConfig()
    buf = resample(buf, cfg.sample_rate)
    trimmed, bounds = trim_endpoints(buf, cfg.vad)
    track = estimate_f0(trimmed, cfg.pitch)
    values: dict[str, float] = dict(pitch_stats(track))
    try:
        marks = extract_period_marks(trimmed, track, cfg.pitch)
        values.update(jitter_features(marks))
        values.update(shimmer_features(marks))
    except InsufficientPeriods as exc:
        logger.warning("%s: %s; jitter/shimmer left missing", buf.source_id, exc)
        values.update({n: MISSING for n in JITTER + SHIMMER})
    values.update(mfcc_features(trimmed, cfg.mfcc))
    values.update({f"RelBandPower{k}": float(v) for k, v in enumerate(rel_band_power(trimmed))})
    values["HNR"] = hnr(trimmed, cfg.pitch, track=track)
    try:
        values["RPDE"] = rpde(trimmed, cfg.embed)
    except (NoRecurrence, InsufficientSignal) as exc:
        logger.warning("%s: RPDE unavailable (%s)", buf.source_id, exc)
        values["RPDE"] = MISSING
    values["DFA"] = dfa(trimmed, cfg.dfa)
    try:
        values["PPE"] = ppe(track, cfg.ppe)
    except InsufficientSignal as exc:
        logger.warning("%s: PPE unavailable (%s)", buf.source_id, exc)
        values["PPE"] = MISSING
    return RecordingFeatures({n: values.get(n, MISSING) for n in ALL_FEATURES}, bounds)


def extract_file(path: str | Path, cfg: ExtractionConfig | None = None) -> RecordingFeatures:
    return extract_buffer(read_wav(path), cfg)


class VoiceFeatureExtractor(TransformerMixin, BaseEstimator):
    """Transformer from recordings (paths or AudioBuffers) to feature rows.

    Stateless: ``fit`` only validates parameters. Rows follow
    ``get_feature_names_out()``; missing values are NaN.
    """

    def __init__(self, sample_rate=ANALYSIS_RATE, f0_floor=60.0, f0_ceil=400.0,
                 voicing_threshold=0.45, all_features=False, n_jobs=1):
        self.sample_rate = sample_rate
        self.f0_floor = f0_floor
        self.f0_ceil = f0_ceil
        self.voicing_threshold = voicing_threshold
        self.all_features = all_features
        self.n_jobs = n_jobs

    def _config(self) -> ExtractionConfig:
        pitch = PitchConfig(f0_floor=self.f0_floor, f0_ceil=self.f0_ceil,
                            voicing_threshold=self.voicing_threshold)
        return ExtractionConfig(sample_rate=self.sample_rate, pitch=pitch)

    def fit(self, X=None, y=None):
        if not 0 < self.f0_floor < self.f0_ceil:
            raise ValueError("need 0 < f0_floor < f0_ceil")
        self.feature_names_out_ = np.array(ALL_FEATURES if self.all_features else CANONICAL_FEATURES)
        return self

    def get_feature_names_out(self, input_features=None):
        names = ALL_FEATURES if self.all_features else CANONICAL_FEATURES
        return np.array(names, dtype=object)

    def transform(self, X):
        from joblib import Parallel, delayed

        cfg = self._config()
        names = tuple(self.get_feature_names_out())

        def one(item):
            buf = item if isinstance(item, AudioBuffer) else read_wav(item)
            return extract_buffer(buf, cfg).row(names)

        rows = Parallel(n_jobs=self.n_jobs)(delayed(one)(item) for item in X)
        return np.vstack(rows) if rows else np.empty((0, len(names)))
