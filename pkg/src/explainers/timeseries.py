import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from src.data.timeseries import TimeSeriesDataset, TimeSeriesInstance
from src.errors import ExplanationError, ModelError
from src.models.mlp import MlpModel, forward_batch, predict_batch

logger = logging.getLogger(__name__)

SeriesLike = Union[np.ndarray, TimeSeriesInstance, List[float], Tuple[float, ...]]


@dataclass(frozen=True)
class ImportanceMap:
    values: np.ndarray
    method: str = "occlusion"
    window_w: int = 1

    def __post_init__(self):
        if self.values.ndim != 1 or not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ExplanationError("importance must be a finite, non-negative 1-d array")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def peak(self) -> int:
        # argmax returns the lowest index on ties
        return int(np.argmax(self.values))


@dataclass(frozen=True)
class NativeGuideCounterfactual:
    query: np.ndarray
    counterfactual: np.ndarray
    # inclusive bounds of the substituted window
    window: Tuple[int, int]
    nun_id: int
    nun: np.ndarray
    query_class: int
    nun_class: int
    valid: bool
    # (start, end, predicted class) after each substitution
    growth: List[Tuple[int, int, int]]

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.counterfactual - self.query))

    @property
    def nun_distance(self) -> float:
        return float(np.linalg.norm(self.nun - self.query))


def _as_values(series: SeriesLike) -> np.ndarray:
    if isinstance(series, TimeSeriesInstance):
        series = series.values
    return np.asarray(series, dtype=float)


def default_window(length: int) -> int:
    return max(1, length // 10)


def occlusion_importance(
    model: MlpModel,
    series: SeriesLike,
    window_w: int,
    baseline: np.ndarray,
) -> ImportanceMap:
    """
    Slide a window of ``window_w`` steps over the series, replacing it with
    ``baseline`` (the training mean signal), and credit each covered timestep
    with the mean drop in the predicted-class probability. Negative drops count as 0.
    """
    if not model.is_classifier:
        raise ModelError("occlusion importance needs a classification head")
    x = _as_values(series)
    length = x.size
    baseline = np.asarray(baseline, dtype=float)
    if baseline.shape != x.shape:
        raise ExplanationError(f"baseline length {baseline.size} does not match series length {length}")
    if not 1 <= window_w <= length:
        raise ExplanationError(f"occlusion window must lie in [1, {length}], got {window_w}")

    original = forward_batch(model, x[None, :]).probs[0]
    predicted = int(np.argmax(original))
    starts = np.arange(length - window_w + 1)
    occluded = np.repeat(x[None, :], starts.size, axis=0)
    for row, t in enumerate(starts):
        occluded[row, t:t + window_w] = baseline[t:t + window_w]
    drops = np.maximum(original[predicted] - forward_batch(model, occluded).probs[:, predicted], 0.0)

    total = np.zeros(length)
    covered = np.zeros(length)
    for t, drop in zip(starts, drops):
        total[t:t + window_w] += drop
        covered[t:t + window_w] += 1
    return ImportanceMap(values=total / covered, window_w=window_w)


def _nun(
    x: np.ndarray, query_class: int, model: MlpModel, dataset: TimeSeriesDataset
) -> Tuple[int, np.ndarray, int]:
    classes = predict_batch(model, dataset.values)
    unlike = np.flatnonzero(classes != query_class)
    if unlike.size == 0:
        raise ExplanationError("every series is predicted in the query's class; no unlike neighbor")
    distances = np.linalg.norm(dataset.values[unlike] - x, axis=1)
    best = unlike[np.lexsort((dataset.ids[unlike], distances))[0]]
    return int(dataset.ids[best]), dataset.values[best], int(classes[best])


def native_guide_cf(
    query: SeriesLike,
    model: MlpModel,
    dataset: TimeSeriesDataset,
    importance: Optional[ImportanceMap] = None,
    window_w: Optional[int] = None,
) -> NativeGuideCounterfactual:
    """
    Native Guide counterfactual:
      1) retrieve the nearest unlike neighbor (NUN) of the query
      2) seed a window at the most important timestep
      3) copy the NUN over the window until the model predicts the NUN's class,
         growing the window one step at a time, right then left
    """
    x = _as_values(query)
    if x.size != dataset.length:
        raise ExplanationError(f"query length {x.size} does not match dataset length {dataset.length}")
    if importance is None:
        importance = occlusion_importance(
            model, x, window_w or default_window(x.size), dataset.mean_signal()
        )
    if len(importance) != x.size:
        raise ExplanationError("importance map length does not match the query")

    query_class = int(predict_batch(model, x[None, :])[0])
    nun_id, nun_values, nun_class = _nun(x, query_class, model, dataset)

    last = x.size - 1
    start = end = importance.peak
    prefer_right = True
    growth: List[Tuple[int, int, int]] = []
    while True:
        candidate = x.copy()
        candidate[start:end + 1] = nun_values[start:end + 1]
        predicted = int(predict_batch(model, candidate[None, :])[0])
        growth.append((start, end, predicted))
        logger.debug(f"Window [{start}, {end}] -> class {predicted}")
        if predicted == nun_class or (start == 0 and end == last):
            break
        if prefer_right:
            if end < last:
                end += 1
            else:
                start -= 1
        else:
            if start > 0:
                start -= 1
            else:
                end += 1
        prefer_right = not prefer_right

    logger.info(
        f"Native Guide: NUN {nun_id}, window [{start}, {end}] of {x.size}, "
        f"class {query_class} -> {predicted}"
    )
    return NativeGuideCounterfactual(
        query=x,
        counterfactual=candidate,
        window=(start, end),
        nun_id=nun_id,
        nun=nun_values,
        query_class=query_class,
        nun_class=nun_class,
        valid=predicted == nun_class,
        growth=growth,
    )
