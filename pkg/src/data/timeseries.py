from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from src.errors import DataError


@dataclass(frozen=True)
class TimeSeriesInstance:
    id: int
    values: Tuple[float, ...]
    label: int


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Fixed-length labeled series; labels index into ``class_labels``."""

    instances: Tuple[TimeSeriesInstance, ...]
    class_labels: Tuple[str, ...]

    def __post_init__(self):
        if not self.instances:
            raise DataError("empty dataset")
        lengths = {len(inst.values) for inst in self.instances}
        if len(lengths) != 1:
            raise DataError(f"series lengths differ: {sorted(lengths)}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("series values must be finite")

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[TimeSeriesInstance]:
        return iter(self.instances)

    def __getitem__(self, index: int) -> TimeSeriesInstance:
        return self.instances[index]

    @property
    def length(self) -> int:
        return len(self.instances[0].values)

    @cached_property
    def values(self) -> np.ndarray:
        return np.array([inst.values for inst in self.instances], dtype=float)

    @cached_property
    def ids(self) -> np.ndarray:
        return np.array([inst.id for inst in self.instances], dtype=int)

    @cached_property
    def labels(self) -> np.ndarray:
        return np.array([inst.label for inst in self.instances], dtype=int)

    def mean_signal(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def by_id(self, instance_id: int) -> TimeSeriesInstance:
        for inst in self.instances:
            if inst.id == instance_id:
                return inst
        raise DataError(f"no series with id {instance_id}")


def build_dataset(
    rows: Sequence[Sequence[float]], labels: Sequence[str]
) -> TimeSeriesDataset:
    """Assign dense ids in row order and class indices in first-appearance order."""
    class_labels: List[str] = list(dict.fromkeys(labels))
    instances = tuple(
        TimeSeriesInstance(id=i, values=tuple(float(v) for v in row), label=class_labels.index(lab))
        for i, (row, lab) in enumerate(zip(rows, labels))
    )
    return TimeSeriesDataset(instances=instances, class_labels=tuple(class_labels))
