"""Canonical feature names and their order in every matrix and CSV."""

PITCH = ("MedianPitch", "MeanPitch", "StdDevPitch")
JITTER = ("MeanJitter", "MedianJitter", "LocalJitter", "LocalAbsoluteJitter",
          "RapJitter", "Ppq5Jitter", "DdpJitter")
SHIMMER = ("MeanShimmer", "MedianShimmer", "LocalShimmer", "LocaldbShimmer",
           "Apq3Shimmer", "Apq5Shimmer", "Apq11Shimmer", "DdaShimmer")
MFCC_MEAN = tuple(f"MeanMFCC{k}" for k in range(13))
MFCC_VARIATION = tuple(f"VariationMFCC{k}" for k in range(13))
BAND = tuple(f"RelBandPower{k}" for k in range(4))
OTHER = ("HNR", "RPDE", "DFA", "PPE")

ALL_FEATURES = PITCH + JITTER + SHIMMER + MFCC_MEAN + MFCC_VARIATION + BAND + OTHER

# variants left out of the default set because they duplicate kept ones (|r| > 0.9)
CORRELATED_VARIANTS = frozenset({
    "LocalJitter", "RapJitter", "Ppq5Jitter",
    "MeanShimmer", "LocalShimmer", "LocaldbShimmer", "Apq3Shimmer", "Apq5Shimmer",
})

CANONICAL_FEATURES = tuple(n for n in ALL_FEATURES if n not in CORRELATED_VARIANTS)

JITTER_FAMILY = frozenset(JITTER)
SHIMMER_FAMILY = frozenset(SHIMMER)
