import logging
from typing import Iterator, List, Optional, Sequence

import numpy as np

from src.config import DEFAULT_TAU
from src.data.casebase import Case, CaseBase
from src.errors import AugmentationError, ExplanationError, RetrievalError
from src.explainers.casebased import (
    ExplanationCase,
    generate_cf,
    iter_case_based_counterfactuals,
    mine_explanation_cases,
)
from src.models.mlp import MlpModel
from src.retrieval.knn import nun, predicted_classes

logger = logging.getLogger(__name__)


def _sources_by_nun_distance(
    casebase: CaseBase, model: MlpModel, target_class: int, case_classes: np.ndarray
) -> List[Case]:
    """Non-target cases, those nearest their unlike neighbor (the boundary) first."""
    keyed = []
    for case in casebase.cases:
        if case.label == target_class:
            continue
        try:
            gap = nun(case, casebase, model, classes=case_classes).distance
        except RetrievalError:
            gap = float("inf")
        keyed.append((gap, case.id, case))
    keyed.sort(key=lambda item: (item[0], item[1]))
    return [case for _, _, case in keyed]


def cf_augment(
    casebase: CaseBase,
    model: MlpModel,
    target_class: int,
    n_needed: int,
    tau: float = DEFAULT_TAU,
    xcs: Optional[Sequence[ExplanationCase]] = None,
) -> List[Case]:
    """
    Synthetic ``target_class`` cases from case-based counterfactuals of the
    non-target cases. Sources are cycled, one counterfactual per source per
    cycle, until ``n_needed`` distinct cases exist or every source is exhausted.
    """
    model.require_classifier("counterfactual augmentation")
    if n_needed < 1:
        raise AugmentationError("n_needed must be at least 1")
    if not 0 <= target_class < casebase.schema.n_classes:
        raise AugmentationError(f"target class {target_class} is out of range")
    if xcs is None:
        xcs = mine_explanation_cases(casebase, tau)
    crossing = [xc for xc in xcs if target_class in xc.classes]
    case_classes = predicted_classes(model, casebase)
    if not crossing and not np.any(case_classes == target_class):
        raise AugmentationError(
            f"cannot augment class {target_class}: no explanation case crosses into it and no case is predicted in it"
        )

    sources = _sources_by_nun_distance(casebase, model, target_class, case_classes)
    streams: List[Iterator] = []
    for source in sources:
        if crossing:
            streams.append(
                iter_case_based_counterfactuals(
                    source, model, casebase, crossing, tau, target_class, case_classes=case_classes
                )
            )
        else:
            streams.append(iter(_nun_only(source, model, casebase, target_class, tau)))

    synthetic: List[Case] = []
    seen = set()
    next_id = casebase.next_id
    while streams and len(synthetic) < n_needed:
        still_active = []
        for stream in streams:
            if len(synthetic) >= n_needed:
                still_active.append(stream)
                break
            cf = next(stream, None)
            if cf is None:
                continue
            still_active.append(stream)
            if cf.instance in seen:
                continue
            seen.add(cf.instance)
            synthetic.append(cf.as_case(next_id, label=target_class))
            next_id += 1
        streams = still_active

    logger.info(
        f"Counterfactual augmentation: {len(synthetic)}/{n_needed} synthetic cases for class "
        f"{target_class} from {len(sources)} sources"
    )
    return synthetic


def _nun_only(
    source: Case, model: MlpModel, casebase: CaseBase, target_class: int, tau: float
) -> List:
    try:
        cf = generate_cf(source, model, casebase, [], 0, tau, target_class)
    except ExplanationError:
        return []
    return [cf] if cf.valid else []
