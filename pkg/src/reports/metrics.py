import logging
from itertools import combinations
from typing import Optional, Sequence, Tuple

import numpy as np

from src.config import DEFAULT_TAU
from src.data.casebase import Case, CaseBase, FeatureValue, Scaler, diff_features, distance
from src.data.encoding import encode_case
from src.explainers.casebased import ExplanationCase
from src.models.mlp import MlpModel, predict
from src.reports.schemas import ExplanationMetrics
from src.retrieval.knn import predicted_classes

logger = logging.getLogger(__name__)


def _as_case(instance) -> Case:
    if isinstance(instance, Case):
        return instance
    return Case(id=-1, features=tuple(instance))


def native_pair_distance(casebase: CaseBase, xcs: Sequence[ExplanationCase]) -> Optional[float]:
    """Mean feature-space distance between the two members of each explanation case."""
    if not xcs:
        return None
    gaps = [
        distance(casebase.by_id(xc.p_id), casebase.by_id(xc.q_id), casebase.scaler)
        for xc in xcs
    ]
    return float(np.mean(gaps))


def evaluate_explanation(
    query: Case,
    instance,
    model: MlpModel,
    casebase: CaseBase,
    xcs: Sequence[ExplanationCase],
    tau: float = DEFAULT_TAU,
    case_classes: Optional[np.ndarray] = None,
) -> ExplanationMetrics:
    """
    Proximity, sparsity, plausibility and relative distance of an explanation
    instance, all measured in the case base's normalized feature space.
    """
    candidate = _as_case(instance)
    proximity = distance(query, candidate, casebase.scaler)
    sparsity = len(diff_features(query, candidate, casebase.scaler, tau))

    instance_class = int(predict(model, encode_case(model.encoder, candidate)))
    query_class = int(predict(model, encode_case(model.encoder, query)))
    if case_classes is None:
        case_classes = predicted_classes(model, casebase)
    distances = casebase.distances_to(candidate.features)
    same = case_classes == instance_class
    if same.any():
        plausibility = float(distances[same].min())
    else:
        logger.warning(f"No training case is predicted in class {instance_class}; plausibility uses all cases")
        plausibility = float(distances.min())

    native = native_pair_distance(casebase, xcs)
    relative = None
    if native is not None and native > 0.0:
        relative = proximity / native
    return ExplanationMetrics(
        proximity=proximity,
        sparsity=sparsity,
        plausibility=plausibility,
        relative_cf_distance=relative,
        valid=instance_class != query_class,
    )


def diversity(
    instances: Sequence[Sequence[FeatureValue]], scaler: Scaler
) -> Optional[float]:
    """Mean pairwise normalized distance; absent for fewer than two instances."""
    if len(instances) < 2:
        return None
    cases = [_as_case(i) for i in instances]
    pairs: Sequence[Tuple[Case, Case]] = list(combinations(cases, 2))
    return float(np.mean([distance(a, b, scaler) for a, b in pairs]))
