import logging
from collections import Counter
from typing import Dict, Sequence

import numpy as np

from src.data.casebase import Case, CaseBase
from src.data.encoding import encode_rows
from src.errors import RetrievalError
from src.models.mlp import MlpModel, contributions_batch, forward_batch
from src.retrieval.knn import (
    NeighborResult,
    Space,
    build_contribution_index,
    build_latent_index,
    knn,
    predicted_classes,
    rank,
)

logger = logging.getLogger(__name__)


def majority_class(neighbors: Sequence[NeighborResult], classes_by_id: Dict[int, int]) -> int:
    """Most frequent class; ties go to the class of the nearest tied neighbor."""
    votes = [classes_by_id[n.case_id] for n in neighbors]
    counts = Counter(votes)
    top = max(counts.values())
    return next(c for c in votes if counts[c] == top)


def twin_fidelity(
    model: MlpModel,
    casebase: CaseBase,
    eval_cases: Sequence[Case],
    k: int,
    space: Space = Space.CONTRIBUTION,
    exclude_self: bool = False,
) -> float:
    """
    Fraction of eval cases whose k-NN verdict (majority of the neighbors'
    predicted classes) matches the model's own prediction.
    ``exclude_self`` drops the neighbor sharing the eval case's id (leave-one-out).
    """
    if k < 1:
        raise RetrievalError("k must be at least 1")
    if not eval_cases:
        raise RetrievalError("fidelity needs at least one eval case")

    X_eval = encode_rows(model.encoder, [c.features for c in eval_cases])
    case_classes = predicted_classes(model, casebase)
    classes_by_id = dict(zip(casebase.ids.tolist(), case_classes.tolist()))

    if space == Space.CONTRIBUTION:
        index = build_contribution_index(model, casebase)
        eval_classes, queries = contributions_batch(model, X_eval)
    elif space == Space.LATENT:
        index = build_latent_index(model, casebase)
        fp = forward_batch(model, X_eval)
        eval_classes, queries = np.argmax(fp.logits, axis=1), fp.penultimate
    else:
        index = None
        eval_classes = np.argmax(forward_batch(model, X_eval).logits, axis=1)
        queries = [None] * len(eval_cases)

    agree = 0
    for case, query, predicted in zip(eval_cases, queries, eval_classes):
        excluded = {case.id} if exclude_self else set()
        if index is not None:
            neighbors = knn(query, k, index, exclude_ids=excluded)
        else:
            distances = casebase.distances_to(case.features)
            keep = ~np.isin(casebase.ids, list(excluded))
            if not keep.any():
                raise RetrievalError("no case left after self-exclusion")
            neighbors = rank(casebase.ids[keep], distances[keep], k, Space.FEATURE)
        if majority_class(neighbors, classes_by_id) == int(predicted):
            agree += 1

    fidelity = agree / len(eval_cases)
    logger.info(f"Twin fidelity in {space.value} space (k={k}): {fidelity:.4f}")
    return fidelity


def fidelity_report(
    model: MlpModel,
    casebase: CaseBase,
    eval_cases: Sequence[Case],
    k: int,
    exclude_self: bool = False,
) -> Dict[str, float]:
    """Contribution-space fidelity alongside the feature- and activation-space baselines."""
    return {
        "fidelity": twin_fidelity(model, casebase, eval_cases, k, Space.CONTRIBUTION, exclude_self),
        "feature_fidelity": twin_fidelity(model, casebase, eval_cases, k, Space.FEATURE, exclude_self),
        "latent_fidelity": twin_fidelity(model, casebase, eval_cases, k, Space.LATENT, exclude_self),
    }
