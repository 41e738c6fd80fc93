import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.data.schema import FeatureKind, FeatureSchema, FeatureSpec
from src.errors import DataError, SchemaError

FeatureValue = Union[float, str]


@dataclass(frozen=True)
class Case:
    id: int
    features: Tuple[FeatureValue, ...]
    label: int = 0
    # Observed target for regression case bases
    outcome: Optional[float] = None


@dataclass(frozen=True)
class Scaler:
    """Per-numeric-feature (min, max), keyed by feature index."""

    n_features: int
    ranges: Dict[int, Tuple[float, float]]

    @classmethod
    def fit(cls, schema: FeatureSchema, cases: Sequence[Case]) -> "Scaler":
        ranges = {}
        for i in schema.numeric_indices:
            values = [float(c.features[i]) for c in cases]
            ranges[i] = (min(values), max(values)) if values else (0.0, 0.0)
        return cls(n_features=schema.n_features, ranges=ranges)

    @property
    def numeric_indices(self) -> List[int]:
        return sorted(self.ranges)

    def scale(self, index: int, value: float) -> float:
        low, high = self.ranges[index]
        if high == low:
            return 0.0
        # never clipped: out-of-range queries extrapolate
        return (float(value) - low) / (high - low)


def normalize(case: Case, scaler: Scaler) -> List[FeatureValue]:
    """Min-max scale numeric features; categorical values pass through untouched."""
    return [
        scaler.scale(i, v) if i in scaler.ranges else v
        for i, v in enumerate(case.features)
    ]


def _feature_deltas(
    a: Sequence[FeatureValue], b: Sequence[FeatureValue], scaler: Scaler
) -> np.ndarray:
    if len(a) != scaler.n_features or len(b) != scaler.n_features:
        raise DataError(
            f"feature vector length mismatch: {len(a)}/{len(b)} vs schema {scaler.n_features}"
        )
    deltas = np.empty(scaler.n_features, dtype=float)
    for i in range(scaler.n_features):
        if i in scaler.ranges:
            deltas[i] = abs(scaler.scale(i, a[i]) - scaler.scale(i, b[i]))
        else:
            deltas[i] = 0.0 if a[i] == b[i] else 1.0
    return deltas


def _check_weights(weights: Optional[Sequence[float]], n_features: int) -> np.ndarray:
    if weights is None:
        return np.ones(n_features)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n_features,):
        raise DataError(
            f"weight vector length {w.size} does not match feature count {n_features}"
        )
    if np.any(w < 0):
        raise DataError("feature weights must be non-negative")
    return w


def distance(
    a: Case, b: Case, scaler: Scaler, weights: Optional[Sequence[float]] = None
) -> float:
    """Weighted Euclidean over normalized numerics and 0/1 categorical overlap."""
    w = _check_weights(weights, scaler.n_features)
    d = _feature_deltas(a.features, b.features, scaler)
    return math.sqrt(float(np.sum(w * d * d)))


def check_tau(tau: float) -> None:
    if not 0.0 <= tau < 1.0:
        raise DataError(f"tau must lie in [0, 1), got {tau}")


def diff_features(p: Case, q: Case, scaler: Scaler, tau: float) -> frozenset:
    """Indices where p and q differ: normalized gap > tau, or unequal categories."""
    check_tau(tau)
    d = _feature_deltas(p.features, q.features, scaler)
    return frozenset(int(i) for i in np.flatnonzero(d > tau))


def _conforms(value: FeatureValue, kind: FeatureKind) -> bool:
    if kind == FeatureKind.CATEGORICAL:
        return isinstance(value, str)
    if isinstance(value, (bool, np.bool_)) or isinstance(value, str):
        return False
    try:
        return math.isfinite(float(value))
    except (TypeError, ValueError):
        return False


def check_case(case: Case, schema: FeatureSchema) -> None:
    if len(case.features) != schema.n_features:
        raise SchemaError(
            f"case {case.id}: {len(case.features)} features, schema has {schema.n_features}"
        )
    for spec, value in zip(schema.features, case.features):
        if not _conforms(value, spec.kind):
            raise SchemaError(
                f"case {case.id}: value {value!r} does not conform to {spec.kind.value} feature '{spec.name}'"
            )
    if schema.task == "classification" and not 0 <= case.label < schema.n_classes:
        raise SchemaError(f"case {case.id}: label index {case.label} out of range")


def refresh_schema(schema: FeatureSchema, cases: Sequence[Case]) -> FeatureSchema:
    """Recompute observed ranges and category sets from the cases."""
    specs = []
    for i, spec in enumerate(schema.features):
        if spec.kind == FeatureKind.NUMERIC:
            values = [float(c.features[i]) for c in cases]
            observed = (min(values), max(values)) if values else spec.observed_range
            specs.append(FeatureSpec(name=spec.name, kind=spec.kind, observed_range=observed))
        else:
            categories = list(spec.categories or [])
            for c in cases:
                if c.features[i] not in categories:
                    categories.append(c.features[i])
            specs.append(FeatureSpec(name=spec.name, kind=spec.kind, categories=categories))
    return schema.model_copy(update={"features": specs})


@dataclass(frozen=True)
class CaseBase:
    """Immutable labeled case memory of the transparent twin."""

    schema: FeatureSchema
    cases: Tuple[Case, ...]
    scaler: Scaler = field(repr=False)

    def __post_init__(self):
        ids = [c.id for c in self.cases]
        if len(set(ids)) != len(ids):
            raise SchemaError("case ids must be distinct")
        for case in self.cases:
            check_case(case, self.schema)
        if sorted(self.scaler.ranges) != self.schema.numeric_indices:
            raise SchemaError("scaler must cover exactly the numeric features")

    @classmethod
    def build(cls, schema: FeatureSchema, cases: Iterable[Case]) -> "CaseBase":
        cases = tuple(cases)
        schema = refresh_schema(schema, cases)
        return cls(schema=schema, cases=cases, scaler=Scaler.fit(schema, cases))

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self) -> Iterator[Case]:
        return iter(self.cases)

    @cached_property
    def _positions(self) -> Dict[int, int]:
        return {c.id: pos for pos, c in enumerate(self.cases)}

    def by_id(self, case_id: int) -> Case:
        try:
            return self.cases[self._positions[case_id]]
        except KeyError:
            raise DataError(f"no case with id {case_id}") from None

    def position(self, case_id: int) -> int:
        return self._positions[case_id]

    @cached_property
    def ids(self) -> np.ndarray:
        return np.array([c.id for c in self.cases], dtype=int)

    @cached_property
    def labels(self) -> np.ndarray:
        return np.array([c.label for c in self.cases], dtype=int)

    @cached_property
    def outcomes(self) -> np.ndarray:
        return np.array(
            [np.nan if c.outcome is None else c.outcome for c in self.cases], dtype=float
        )

    @property
    def next_id(self) -> int:
        return int(self.ids.max()) + 1 if len(self.cases) else 0

    @cached_property
    def _normalized(self) -> np.ndarray:
        cols = self.scaler.numeric_indices
        matrix = np.empty((len(self.cases), len(cols)), dtype=float)
        for j, i in enumerate(cols):
            matrix[:, j] = [self.scaler.scale(i, c.features[i]) for c in self.cases]
        return matrix

    @cached_property
    def _categorical(self) -> np.ndarray:
        cols = self.schema.categorical_indices
        return np.array(
            [[c.features[i] for i in cols] for c in self.cases], dtype=object
        ).reshape(len(self.cases), len(cols))

    def feature_deltas(self, features: Sequence[FeatureValue]) -> np.ndarray:
        """Per-feature |d_i| from every stored case to ``features``, shape (n, d)."""
        if len(features) != self.schema.n_features:
            raise DataError(
                f"feature vector length {len(features)} does not match schema {self.schema.n_features}"
            )
        deltas = np.zeros((len(self.cases), self.schema.n_features))
        num_cols = self.scaler.numeric_indices
        if num_cols:
            query = np.array([self.scaler.scale(i, features[i]) for i in num_cols])
            deltas[:, num_cols] = np.abs(self._normalized - query)
        cat_cols = self.schema.categorical_indices
        if cat_cols:
            query = np.array([features[i] for i in cat_cols], dtype=object)
            deltas[:, cat_cols] = (self._categorical != query).astype(float)
        return deltas

    def distances_to(
        self, features: Sequence[FeatureValue], weights: Optional[Sequence[float]] = None
    ) -> np.ndarray:
        w = _check_weights(weights, self.schema.n_features)
        d = self.feature_deltas(features)
        return np.sqrt((d * d) @ w)

    def with_cases(self, extra: Iterable[Case]) -> "CaseBase":
        return CaseBase.build(self.schema, self.cases + tuple(extra))

    def subset(self, case_ids: Iterable[int]) -> "CaseBase":
        """Cases with the given ids, keeping the ids and the schema's class order."""
        wanted = set(case_ids)
        return CaseBase.build(self.schema, [c for c in self.cases if c.id in wanted])

    def class_members(self, label: int) -> List[Case]:
        return [c for c in self.cases if c.label == label]


def train_test_split(
    casebase: CaseBase, holdout_fraction: float, seed: int
) -> Tuple[CaseBase, CaseBase]:
    """Seeded split that keeps original case ids on both sides."""
    if not 0.0 < holdout_fraction < 1.0:
        raise DataError("holdout_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(casebase))
    n_holdout = max(1, int(round(holdout_fraction * len(casebase))))
    holdout_ids = casebase.ids[order[:n_holdout]]
    train_ids = casebase.ids[order[n_holdout:]]
    return casebase.subset(train_ids.tolist()), casebase.subset(holdout_ids.tolist())


def align_class_labels(casebase: CaseBase, class_labels: Sequence[str]) -> CaseBase:
    """Re-index labels to ``class_labels`` (e.g. a model's or another file's class order)."""
    if casebase.schema.task != "classification":
        return casebase
    order = list(class_labels)
    if order == casebase.schema.class_labels:
        return casebase
    unknown = set(casebase.schema.class_labels) - set(order)
    if unknown:
        raise SchemaError(f"class labels {sorted(unknown)} are not among {order}")
    schema = casebase.schema.model_copy(update={"class_labels": order})
    cases = [
        Case(
            id=c.id,
            features=c.features,
            label=order.index(casebase.schema.class_labels[c.label]),
            outcome=c.outcome,
        )
        for c in casebase.cases
    ]
    return CaseBase.build(schema, cases)
