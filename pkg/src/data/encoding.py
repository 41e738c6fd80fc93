from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from src.data.casebase import Case, CaseBase, FeatureValue
from src.data.schema import FeatureKind
from src.errors import DataError


class EncodedFeature(BaseModel):
    name: str
    kind: FeatureKind
    # numeric: fitted (min, max); categorical: one-hot category order
    scale: Optional[Tuple[float, float]] = None
    categories: Optional[List[str]] = None


class InputEncoder(BaseModel):
    """Maps a case's features to the network input: scaled numerics, one-hot categoricals."""

    features: List[EncodedFeature]

    @classmethod
    def from_casebase(cls, casebase: CaseBase) -> "InputEncoder":
        encoded = []
        for i, spec in enumerate(casebase.schema.features):
            if spec.kind == FeatureKind.NUMERIC:
                encoded.append(
                    EncodedFeature(name=spec.name, kind=spec.kind, scale=casebase.scaler.ranges[i])
                )
            else:
                encoded.append(
                    EncodedFeature(name=spec.name, kind=spec.kind, categories=list(spec.categories or []))
                )
        return cls(features=encoded)

    @property
    def width(self) -> int:
        return sum(
            1 if f.kind == FeatureKind.NUMERIC else len(f.categories or [])
            for f in self.features
        )

    @property
    def category_map(self) -> Dict[str, List[str]]:
        return {
            f.name: list(f.categories or [])
            for f in self.features
            if f.kind == FeatureKind.CATEGORICAL
        }

    def numeric_columns(self) -> List[int]:
        """Encoded column of each numeric feature, in feature order."""
        columns, offset = [], 0
        for f in self.features:
            if f.kind == FeatureKind.NUMERIC:
                columns.append(offset)
                offset += 1
            else:
                offset += len(f.categories or [])
        return columns

    def encode(self, features: Sequence[FeatureValue]) -> np.ndarray:
        if len(features) != len(self.features):
            raise DataError(
                f"expected {len(self.features)} features, got {len(features)}"
            )
        out = np.zeros(self.width)
        offset = 0
        for f, value in zip(self.features, features):
            if f.kind == FeatureKind.NUMERIC:
                low, high = f.scale
                try:
                    number = float(value)
                except (TypeError, ValueError):
                    raise DataError(f"feature '{f.name}': {value!r} is not numeric") from None
                out[offset] = 0.0 if high == low else (number - low) / (high - low)
                offset += 1
            else:
                cats = f.categories or []
                # unseen categories encode as all-zero
                if value in cats:
                    out[offset + cats.index(value)] = 1.0
                offset += len(cats)
        return out

    def encode_many(self, rows: Sequence[Sequence[FeatureValue]]) -> np.ndarray:
        if not rows:
            return np.zeros((0, self.width))
        return np.vstack([self.encode(r) for r in rows])

    def decode_numeric(
        self, template: Sequence[FeatureValue], encoded: np.ndarray
    ) -> Tuple[FeatureValue, ...]:
        """Write the encoded numeric columns back into ``template``; categoricals are kept."""
        values = list(template)
        columns = iter(self.numeric_columns())
        for i, f in enumerate(self.features):
            if f.kind == FeatureKind.NUMERIC:
                low, high = f.scale
                z = float(encoded[next(columns)])
                values[i] = low if high == low else low + z * (high - low)
        return tuple(values)


def encode_case(encoder: Optional[InputEncoder], case: Case) -> np.ndarray:
    """Identity encoding when no encoder is attached (raw numeric inputs, e.g. time series)."""
    if encoder is None:
        try:
            return np.asarray(case.features, dtype=float)
        except (TypeError, ValueError):
            raise DataError(f"case {case.id}: raw model inputs must be numeric") from None
    return encoder.encode(case.features)


def encode_rows(
    encoder: Optional[InputEncoder], rows: Sequence[Sequence[FeatureValue]]
) -> np.ndarray:
    if encoder is None:
        return np.asarray(rows, dtype=float)
    return encoder.encode_many(rows)
