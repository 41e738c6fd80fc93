"""Seeded desk-scale datasets: separable blobs, an imbalanced two-regime set, bump series."""

from typing import Sequence

import numpy as np

from src.data.casebase import Case, CaseBase
from src.data.schema import FeatureKind, FeatureSchema, FeatureSpec
from src.data.timeseries import TimeSeriesDataset, build_dataset
from src.errors import DataError

LABEL_NAME = "label"


def _numeric_schema(dims: int, class_labels: Sequence[str]) -> FeatureSchema:
    return FeatureSchema(
        features=[FeatureSpec(name=f"f{i}", kind=FeatureKind.NUMERIC) for i in range(dims)],
        label_name=LABEL_NAME,
        class_labels=list(class_labels),
    )


def _to_casebase(points: np.ndarray, labels: Sequence[int], class_labels: Sequence[str]) -> CaseBase:
    schema = _numeric_schema(points.shape[1], class_labels)
    cases = [
        Case(id=i, features=tuple(float(v) for v in row), label=int(lab))
        for i, (row, lab) in enumerate(zip(points, labels))
    ]
    return CaseBase.build(schema, cases)


def synth_blobs(
    n_per_class: int,
    dims: int,
    class_means: Sequence[Sequence[float]],
    sigma: float,
    seed: int,
) -> CaseBase:
    """Isotropic Gaussian blob per class; class c is labeled "c"."""
    if n_per_class <= 0 or dims <= 0:
        raise DataError("n_per_class and dims must be positive")
    means = np.asarray(class_means, dtype=float)
    if means.ndim != 2 or means.shape[1] != dims:
        raise DataError(f"class_means must be a list of {dims}-d vectors")
    rng = np.random.default_rng(seed)
    points, labels = [], []
    for c, mean in enumerate(means):
        points.append(rng.normal(mean, sigma, size=(n_per_class, dims)))
        labels.extend([c] * n_per_class)
    return _to_casebase(np.vstack(points), labels, [str(c) for c in range(len(means))])


def synth_imbalanced(
    majority: int,
    minority: int,
    seed: int,
    dims: int = 2,
    separation: float = 1.5,
    sigma: float = 1.0,
) -> CaseBase:
    """
    Two-regime data: a large "normal" regime and a small, overlapping
    "outlier" regime shifted by ``separation`` along every axis.
    """
    if majority <= 0 or minority <= 0:
        raise DataError("class counts must be positive")
    rng = np.random.default_rng(seed)
    normal = rng.normal(0.0, sigma, size=(majority, dims))
    outlier = rng.normal(separation, sigma, size=(minority, dims))
    labels = [0] * majority + [1] * minority
    return _to_casebase(np.vstack([normal, outlier]), labels, ["normal", "outlier"])


def synth_series(
    n_per_class: int,
    length: int,
    seed: int,
    noise: float = 0.3,
    bump_height: float = 2.0,
) -> TimeSeriesDataset:
    """Class "0": low-mean noise. Class "1": noise plus a bump in a random window."""
    if n_per_class <= 0 or length < 2:
        raise DataError("n_per_class must be positive and length at least 2")
    rng = np.random.default_rng(seed)
    width = max(2, length // 8)
    rows, labels = [], []
    for _ in range(n_per_class):
        rows.append(rng.normal(0.0, noise, size=length))
        labels.append("0")
    for _ in range(n_per_class):
        series = rng.normal(0.0, noise, size=length)
        start = int(rng.integers(0, length - width + 1))
        series[start:start + width] += bump_height * np.hanning(width + 2)[1:-1]
        rows.append(series)
        labels.append("1")
    return build_dataset(rows, labels)
