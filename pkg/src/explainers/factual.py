import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.data.casebase import Case, CaseBase
from src.data.encoding import encode_case
from src.errors import DataError, ExplanationError, ModelError
from src.models.mlp import MlpModel, contributions, forward, input_attribution
from src.retrieval.knn import VectorIndex, build_contribution_index, build_latent_index, knn

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FactualNeighbor:
    case: Case
    # contributions toward the neighbor's predicted class (penultimate layer)
    contributions: np.ndarray
    # gradient x input at the encoded input; auxiliary display only
    attribution: np.ndarray
    distance: float


@dataclass(frozen=True)
class RegressionNeighbor:
    case: Case
    outcome: Optional[float]
    distance: float


def _in_sample_ids(query: Case, casebase: CaseBase) -> set:
    """Id of the stored case that *is* the query (same id and features), if any."""
    try:
        stored = casebase.by_id(query.id)
    except DataError:
        return set()
    return {query.id} if stored.features == query.features else set()


def explain_factual(
    model: MlpModel,
    casebase: CaseBase,
    query: Case,
    k: int,
    exclude_self: bool = True,
    index: Optional[VectorIndex] = None,
) -> List[FactualNeighbor]:
    """
    Nearest contribution-space neighbors predicted in the query's predicted
    class, whether or not that prediction is correct.
    """
    if not model.is_classifier:
        raise ModelError("explain_factual needs a classification head; use explain_factual_regression")
    x = encode_case(model.encoder, query)
    query_contrib = contributions(model, x)
    predicted = query_contrib.predicted_class
    if index is None:
        index = build_contribution_index(model, casebase)

    excluded = _in_sample_ids(query, casebase) if exclude_self else set()
    candidates = (index.classes == predicted) & ~np.isin(index.ids, list(excluded))
    if not candidates.any():
        raise ExplanationError(f"no training case is predicted in class {predicted}")

    neighbors = knn(query_contrib.values, k, index, class_filter=predicted, exclude_ids=excluded)
    results = []
    for hit in neighbors:
        case = casebase.by_id(hit.case_id)
        xc = encode_case(model.encoder, case)
        results.append(
            FactualNeighbor(
                case=case,
                contributions=index.vectors[casebase.position(hit.case_id)],
                attribution=input_attribution(model, xc, predicted),
                distance=hit.distance,
            )
        )
    logger.info(
        f"Factual explanation for query {query.id} (predicted {predicted}): "
        f"{[r.case.id for r in results]}"
    )
    return results


def explain_factual_regression(
    model: MlpModel,
    casebase: CaseBase,
    query: Case,
    k: int,
    exclude_self: bool = False,
) -> List[RegressionNeighbor]:
    """Nearest neighbors in penultimate-activation space, reported with their stored outcomes."""
    if len(casebase) == 0:
        raise ExplanationError("empty case base")
    index = build_latent_index(model, casebase)
    latent = model_latent(model, query)
    excluded = _in_sample_ids(query, casebase) if exclude_self else set()
    neighbors = knn(latent, k, index, exclude_ids=excluded)
    return [
        RegressionNeighbor(
            case=casebase.by_id(hit.case_id),
            outcome=casebase.by_id(hit.case_id).outcome,
            distance=hit.distance,
        )
        for hit in neighbors
    ]


def model_latent(model: MlpModel, query: Case) -> np.ndarray:
    return forward(model, encode_case(model.encoder, query)).penultimate
