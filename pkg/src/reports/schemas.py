from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from src.config import REPORT_SCHEMA_VERSION


class ExplanationMetrics(BaseModel):
    proximity: float = Field(ge=0.0)
    sparsity: int = Field(ge=0)
    plausibility: float = Field(ge=0.0)
    # absent when the case base holds no explanation cases
    relative_cf_distance: Optional[float] = None
    valid: bool


class VariantMetrics(BaseModel):
    name: str
    n_train: int
    accuracy: float
    recall: Dict[str, float]
    macro_f1: float


class ComparisonTable(BaseModel):
    holdout_size: int
    class_labels: List[str]
    rows: List[VariantMetrics]

    def row(self, name: str) -> VariantMetrics:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


class Provenance(BaseModel):
    seed: Optional[int] = None
    config_hash: str
    model_fingerprint: Optional[str] = None
    version: str


class Report(BaseModel):
    schema_version: str = REPORT_SCHEMA_VERSION
    kind: str
    created_at: datetime
    provenance: Provenance
    payload: Dict[str, Any]
