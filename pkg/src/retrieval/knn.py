import logging
from dataclasses import dataclass
from enum import Enum
from typing import Collection, List, Optional

import numpy as np

from src.data.casebase import Case, CaseBase
from src.data.encoding import encode_case, encode_rows
from src.errors import RetrievalError
from src.models.mlp import MlpModel, contributions_batch, forward_batch, predict_batch

logger = logging.getLogger(__name__)


class Space(str, Enum):
    FEATURE = "feature"
    CONTRIBUTION = "contribution"
    LATENT = "latent"


@dataclass(frozen=True)
class NeighborResult:
    case_id: int
    distance: float
    space: Space


@dataclass(frozen=True)
class VectorIndex:
    """Precomputed per-case vectors; ``classes`` holds each case's model-predicted class."""

    ids: np.ndarray
    vectors: np.ndarray
    space: Space
    classes: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.ids)


def rank(
    ids: np.ndarray, distances: np.ndarray, k: int, space: Space
) -> List[NeighborResult]:
    """Ascending distance, ties broken by ascending case id."""
    order = np.lexsort((ids, distances))[:k]
    return [NeighborResult(int(ids[i]), float(distances[i]), space) for i in order]


def knn(
    query_vector: np.ndarray,
    k: int,
    index: VectorIndex,
    class_filter: Optional[int] = None,
    exclude_class: Optional[int] = None,
    exclude_ids: Collection[int] = (),
) -> List[NeighborResult]:
    """Exhaustive Euclidean scan; returns fewer than k only when the filtered index is smaller."""
    if k < 1:
        raise RetrievalError("k must be at least 1")
    mask = np.ones(len(index), dtype=bool)
    if class_filter is not None or exclude_class is not None:
        if index.classes is None:
            raise RetrievalError("index has no class information to filter on")
        if class_filter is not None:
            mask &= index.classes == class_filter
        if exclude_class is not None:
            mask &= index.classes != exclude_class
    if exclude_ids:
        mask &= ~np.isin(index.ids, list(exclude_ids))
    if not mask.any():
        raise RetrievalError("no indexed case passes the filter")
    query = np.asarray(query_vector, dtype=float)
    diffs = index.vectors[mask] - query
    distances = np.sqrt(np.sum(diffs * diffs, axis=1))
    return rank(index.ids[mask], distances, k, index.space)


def predicted_classes(model: MlpModel, casebase: CaseBase) -> np.ndarray:
    X = encode_rows(model.encoder, [c.features for c in casebase.cases])
    return predict_batch(model, X)


def build_contribution_index(model: MlpModel, casebase: CaseBase) -> VectorIndex:
    """Each case's contributions toward its own predicted class."""
    X = encode_rows(model.encoder, [c.features for c in casebase.cases])
    classes, vectors = contributions_batch(model, X)
    return VectorIndex(casebase.ids, vectors, Space.CONTRIBUTION, classes)


def build_latent_index(model: MlpModel, casebase: CaseBase) -> VectorIndex:
    X = encode_rows(model.encoder, [c.features for c in casebase.cases])
    fp = forward_batch(model, X)
    classes = np.argmax(fp.logits, axis=1) if model.is_classifier else None
    return VectorIndex(casebase.ids, fp.penultimate, Space.LATENT, classes)


def nun(
    query: Case, casebase: CaseBase, model: MlpModel, classes: Optional[np.ndarray] = None
) -> NeighborResult:
    """
    Nearest case (feature-space distance) whose model-predicted class differs
    from the query's predicted class. ``classes`` may carry cached case predictions.
    """
    model.require_classifier("nearest unlike neighbor retrieval")
    query_class = int(predict_batch(model, encode_case(model.encoder, query)[None, :])[0])
    if classes is None:
        classes = predicted_classes(model, casebase)
    unlike = classes != query_class
    if not unlike.any():
        raise RetrievalError("every case is predicted in the query's class; no unlike neighbor")
    distances = casebase.distances_to(query.features)
    hit = rank(casebase.ids[unlike], distances[unlike], 1, Space.FEATURE)[0]
    logger.debug(f"NUN of query {query.id}: case {hit.case_id} at {hit.distance:.4f}")
    return hit


def realize_case(
    latent: np.ndarray,
    casebase: CaseBase,
    model: MlpModel,
    index: Optional[VectorIndex] = None,
) -> Case:
    """Training case whose penultimate activation is nearest to ``latent``."""
    if len(casebase) == 0:
        raise RetrievalError("cannot realize a latent vector against an empty case base")
    if index is None:
        index = build_latent_index(model, casebase)
    hit = knn(latent, 1, index)[0]
    return casebase.by_id(hit.case_id)
