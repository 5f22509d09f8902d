"""Pipeline configuration shared by the CLI and the cross-validation harness."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from nilmevents.detector import DetectorConfig
from nilmevents.errors import DataError
from nilmevents.features import FeatureKind
from nilmevents.normalize import NormKind

CLASSIFIER_VARIANTS = ("knn", "svm")


@dataclass
class PipelineConfig:
    feature: FeatureKind = FeatureKind.CUSUM
    norm: NormKind = NormKind.VARIANCE
    classifier: str = "knn"
    knn_k: int = 87
    svm_c: float = 1.0
    svm_gamma: float = 1.0
    adaptive_rounds: int = 0
    n_non_events: int = 300
    folds: int = 5
    jobs: int = 1
    detector: DetectorConfig = field(default_factory=DetectorConfig)

    def __post_init__(self) -> None:
        self.feature = FeatureKind(self.feature)
        self.norm = NormKind(self.norm)
        if self.classifier not in CLASSIFIER_VARIANTS:
            raise DataError(f"classifier must be one of {CLASSIFIER_VARIANTS}, got {self.classifier!r}")
        if self.adaptive_rounds < 0:
            raise DataError("adaptive_rounds must be >= 0")
        if self.n_non_events < 0:
            raise DataError("n_non_events must be >= 0")
        if self.folds < 2:
            raise DataError("folds must be >= 2")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["feature"] = self.feature.value
        out["norm"] = self.norm.value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        det = data.pop("detector", {})
        if isinstance(det, DetectorConfig):
            detector = det
        else:
            detector = DetectorConfig(**det)
        known = {f for f in cls.__dataclass_fields__ if f != "detector"}
        unknown = set(data) - known
        if unknown:
            raise DataError(f"unknown config fields: {sorted(unknown)}")
        return cls(detector=detector, **data)
