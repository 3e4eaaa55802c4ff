"""Whole-pipeline configuration with a stable fingerprint."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .evaluate import TrainerConfig
from .features.extract import ExtractionConfig

DEFAULT_SEED = 42
DEFAULT_STRATA = ("gender", "age50", "environment")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything that can change a feature value, a model or a metric.

    Paths are deliberately excluded so that the fingerprint only depends on
    settings, not on where files live.
    """

    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    all_features: bool = False
    prune_threshold: float = 0.9
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    decision_threshold: float = 0.5
    seed: int = DEFAULT_SEED
    strata: tuple[str, ...] = DEFAULT_STRATA

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("seed must be set")
        if not 0.0 < self.prune_threshold <= 1.0:
            raise ValueError("prune_threshold must lie in (0, 1]")
        object.__setattr__(self, "strata", tuple(self.strata))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strata"] = list(self.strata)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "extraction" in d:
            d["extraction"] = ExtractionConfig.from_dict(d["extraction"])
        if "trainer" in d:
            d["trainer"] = TrainerConfig.from_dict(d["trainer"])
        if "strata" in d:
            d["strata"] = tuple(d["strata"])
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def updated(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)
