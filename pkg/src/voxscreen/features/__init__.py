from .classic import (MISSING, MfccConfig, jitter_features, mfcc, mfcc_features, pitch_stats,
                      rel_band_power, shimmer_features)
from .extract import ExtractionConfig, RecordingFeatures, VoiceFeatureExtractor, extract_buffer, extract_file
from .names import ALL_FEATURES, CANONICAL_FEATURES
from .nonlinear import DfaConfig, EmbedConfig, PpeConfig, dfa, dfa_alpha, ppe, ppe_from_f0, rpde

__all__ = [
    "ALL_FEATURES", "CANONICAL_FEATURES", "MISSING", "DfaConfig", "EmbedConfig", "ExtractionConfig",
    "MfccConfig", "PpeConfig", "RecordingFeatures", "VoiceFeatureExtractor", "dfa", "dfa_alpha",
    "extract_buffer", "extract_file", "jitter_features", "mfcc", "mfcc_features", "pitch_stats", "ppe",
    "ppe_from_f0", "rel_band_power", "rpde", "shimmer_features",
]
