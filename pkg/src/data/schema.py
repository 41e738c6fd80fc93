from enum import Enum
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, model_validator


class FeatureKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


class FeatureSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kind: FeatureKind
    observed_range: Optional[Tuple[float, float]] = None
    categories: Optional[List[str]] = None

    @model_validator(mode="after")
    def check_range(self):
        if self.observed_range is not None:
            low, high = self.observed_range
            if low > high:
                raise ValueError(
                    f"feature '{self.name}': observed_range min {low} > max {high}"
                )
        return self


class FeatureSchema(BaseModel):
    """The shared-dataset contract both twins are built against."""

    model_config = ConfigDict(frozen=True)

    features: List[FeatureSpec]
    label_name: str
    class_labels: List[str] = []
    task: Literal["classification", "regression"] = "classification"

    @model_validator(mode="after")
    def check_invariants(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if self.label_name in names:
            raise ValueError(f"label '{self.label_name}' is also a feature name")
        if self.task == "classification" and not self.class_labels:
            raise ValueError("class_labels must be non-empty")
        if len(set(self.class_labels)) != len(self.class_labels):
            raise ValueError("class_labels must be unique")
        return self

    @property
    def names(self) -> List[str]:
        return [f.name for f in self.features]

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    @property
    def numeric_indices(self) -> List[int]:
        return [i for i, f in enumerate(self.features) if f.kind == FeatureKind.NUMERIC]

    @property
    def categorical_indices(self) -> List[int]:
        return [i for i, f in enumerate(self.features) if f.kind == FeatureKind.CATEGORICAL]

    def class_index(self, label: str) -> int:
        try:
            return self.class_labels.index(label)
        except ValueError:
            raise ValueError(f"unknown class label '{label}'") from None

    def same_features(self, other: "FeatureSchema") -> bool:
        """Feature names, kinds and label name agree (ranges may differ)."""
        return (
            self.label_name == other.label_name
            and [(f.name, f.kind) for f in self.features]
            == [(f.name, f.kind) for f in other.features]
        )


class SchemaHintFeature(BaseModel):
    name: str
    kind: FeatureKind


class SchemaHint(BaseModel):
    """Optional JSON sidecar overriding inferred feature kinds."""

    features: List[SchemaHintFeature]
    label: Optional[str] = None
