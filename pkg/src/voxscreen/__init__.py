"""Voice-based Parkinson's screening: dysphonia features, tree ensembles, LOOCV and TreeSHAP."""
__version__ = "0.1.0"

from .audio import AudioBuffer, read_wav, write_wav
from .config import PipelineConfig
from .dataset import FeatureMatrix, RecordMeta, load_csv, prune_correlated, save_csv
from .errors import VoxscreenError
from .evaluate import EvalReport, TrainerConfig, auc, evaluate, loocv
from .explain import TreeExplainer, brute_force_shap, global_importance, shap_validation_curve, tree_shap
from .features import CANONICAL_FEATURES, VoiceFeatureExtractor, extract_file
from .learn import GradientBoostedTreesClassifier, RandomForestClassifier, TreeEnsemble

__all__ = [
    "AudioBuffer", "CANONICAL_FEATURES", "EvalReport", "FeatureMatrix", "GradientBoostedTreesClassifier",
    "PipelineConfig", "RandomForestClassifier", "RecordMeta", "TrainerConfig", "TreeEnsemble", "TreeExplainer",
    "VoiceFeatureExtractor", "VoxscreenError", "auc", "brute_force_shap", "evaluate", "extract_file",
    "global_importance", "load_csv", "loocv", "prune_correlated", "read_wav", "save_csv", "shap_validation_curve",
    "tree_shap", "write_wav",
]
