import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.config import DEFAULT_TAU, MAX_ATTEMPTS, MAX_DIFF
from src.data.casebase import Case, CaseBase, FeatureValue, check_tau, diff_features
from src.data.encoding import encode_case
from src.errors import ExplanationError, RetrievalError
from src.models.mlp import MlpModel, predict
from src.retrieval.knn import Space, nun, predicted_classes, rank

logger = logging.getLogger(__name__)

PROVENANCE_XC = "explanation_case"
PROVENANCE_WACHTER = "wachter"
PROVENANCE_NUN = "nun_fallback"


@dataclass(frozen=True)
class ExplanationCase:
    """A stored pair of cases with different labels that differ in at most ``max_diff`` features."""

    p_id: int
    q_id: int
    diff_features: FrozenSet[int]
    # ground-truth labels of p and q
    classes: Tuple[int, int]

    @property
    def key(self) -> Tuple[int, int]:
        return (self.p_id, self.q_id)


@dataclass(frozen=True)
class Counterfactual:
    query_id: int
    query_features: Tuple[FeatureValue, ...]
    instance: Tuple[FeatureValue, ...]
    changed_features: FrozenSet[int]
    # class the model assigns to ``instance``
    target_class: int
    valid: bool
    provenance: str
    explanation_case: Optional[Tuple[int, int]] = None
    donor_id: Optional[int] = None
    attempts: int = 0
    iterations: int = 0
    query_class: int = 0

    def as_case(self, case_id: int, label: Optional[int] = None) -> Case:
        return Case(
            id=case_id,
            features=self.instance,
            label=self.target_class if label is None else label,
        )


def mine_explanation_cases(
    casebase: CaseBase, tau: float = DEFAULT_TAU, max_diff: int = MAX_DIFF
) -> List[ExplanationCase]:
    """
    Exhaustive pairwise scan for explanation cases: different ground-truth
    labels and 1..max_diff difference features. Ordered by (min id, max id).
    """
    check_tau(tau)
    if len(set(casebase.labels.tolist())) < 2:
        logger.warning("Case base holds fewer than two classes; no explanation cases to mine")
        return []

    cases = casebase.cases
    labels = casebase.labels
    ids = casebase.ids
    xcs: List[ExplanationCase] = []
    for i, p in enumerate(cases):
        later = np.arange(i + 1, len(cases))
        if later.size == 0:
            break
        later = later[labels[later] != p.label]
        if later.size == 0:
            continue
        differs = casebase.feature_deltas(p.features)[later] > tau
        counts = differs.sum(axis=1)
        for row, j in enumerate(later):
            if 1 <= counts[row] <= max_diff:
                q = cases[j]
                diff = frozenset(int(f) for f in np.flatnonzero(differs[row]))
                if p.id < q.id:
                    xcs.append(ExplanationCase(p.id, q.id, diff, (p.label, q.label)))
                else:
                    xcs.append(ExplanationCase(q.id, p.id, diff, (q.label, p.label)))

    xcs.sort(key=lambda xc: xc.key)
    logger.info(f"Mined {len(xcs)} explanation cases (tau={tau}, max_diff={max_diff}) from {len(ids)} cases")
    return xcs


def _model_class(model: MlpModel, features: Sequence[FeatureValue]) -> int:
    return int(predict(model, encode_case(model.encoder, Case(id=-1, features=tuple(features)))))


def _ordered_pairs(
    query: Case,
    query_class: int,
    casebase: CaseBase,
    xcs: Sequence[ExplanationCase],
    case_classes: np.ndarray,
) -> List[Tuple[ExplanationCase, Case, Case]]:
    """
    (xc, like member, donor) triples ordered by the query's distance to the
    like member, i.e. the member the model predicts in the query's class.
    """
    distances = casebase.distances_to(query.features)
    ordered = []
    for xc in xcs:
        p_pos, q_pos = casebase.position(xc.p_id), casebase.position(xc.q_id)
        p_like = case_classes[p_pos] == query_class
        q_like = case_classes[q_pos] == query_class
        if not (p_like or q_like):
            continue
        if p_like and q_like:
            # both qualify: the nearer one is the like member, lower id on ties
            p_first = (distances[p_pos], xc.p_id) <= (distances[q_pos], xc.q_id)
            like_pos, donor_pos = (p_pos, q_pos) if p_first else (q_pos, p_pos)
        elif p_like:
            like_pos, donor_pos = p_pos, q_pos
        else:
            like_pos, donor_pos = q_pos, p_pos
        ordered.append((float(distances[like_pos]), xc, casebase.cases[like_pos], casebase.cases[donor_pos]))
    ordered.sort(key=lambda item: (item[0], item[1].key))
    return [(xc, like, donor) for _, xc, like, donor in ordered]


def adapt(query: Case, donor: Case, features: FrozenSet[int]) -> Tuple[FeatureValue, ...]:
    """Query with ``features`` overwritten, verbatim, by the donor's values."""
    values = list(query.features)
    for i in features:
        values[i] = donor.features[i]
    return tuple(values)


def iter_case_based_counterfactuals(
    query: Case,
    model: MlpModel,
    casebase: CaseBase,
    xcs: Sequence[ExplanationCase],
    tau: float = DEFAULT_TAU,
    target_class: Optional[int] = None,
    max_attempts: Optional[int] = None,
    case_classes: Optional[np.ndarray] = None,
) -> Iterator[Counterfactual]:
    """
    Yield every model-validated adaptation of ``query``, nearest explanation
    case first. With ``target_class`` only donors labeled, and candidates
    predicted, in that class are accepted.
    """
    model.require_classifier("case-based counterfactuals")
    query_class = _model_class(model, query.features)
    if case_classes is None:
        case_classes = predicted_classes(model, casebase)
    attempts = 0
    for xc, like, donor in _ordered_pairs(query, query_class, casebase, xcs, case_classes):
        if max_attempts is not None and attempts >= max_attempts:
            return
        if target_class is not None and donor.label != target_class:
            continue
        attempts += 1
        candidate = adapt(query, donor, xc.diff_features)
        predicted = _model_class(model, candidate)
        accepted = predicted != query_class and (target_class is None or predicted == target_class)
        if not accepted:
            logger.debug(
                f"Query {query.id}: candidate from xc {xc.key} rejected (predicted {predicted})"
            )
            continue
        changed = diff_features(query, Case(id=-1, features=candidate), casebase.scaler, tau)
        yield Counterfactual(
            query_id=query.id,
            query_features=query.features,
            instance=candidate,
            changed_features=changed,
            target_class=predicted,
            valid=True,
            provenance=PROVENANCE_XC,
            explanation_case=xc.key,
            donor_id=donor.id,
            attempts=attempts,
            query_class=query_class,
        )


def _fallback(
    query: Case,
    query_class: int,
    model: MlpModel,
    casebase: CaseBase,
    case_classes: np.ndarray,
    tau: float,
    target_class: Optional[int],
    attempts: int,
) -> Counterfactual:
    if target_class is None:
        hit = nun(query, casebase, model, classes=case_classes)
    else:
        targeted = case_classes == target_class
        if not targeted.any():
            raise RetrievalError(f"no case is predicted in target class {target_class}")
        distances = casebase.distances_to(query.features)
        hit = rank(casebase.ids[targeted], distances[targeted], 1, Space.FEATURE)[0]
    donor = casebase.by_id(hit.case_id)
    predicted = _model_class(model, donor.features)
    logger.warning(f"Query {query.id}: no explanation case produced a counterfactual; using NUN {donor.id}")
    return Counterfactual(
        query_id=query.id,
        query_features=query.features,
        instance=donor.features,
        changed_features=diff_features(query, donor, casebase.scaler, tau),
        target_class=predicted,
        valid=predicted != query_class,
        provenance=PROVENANCE_NUN,
        donor_id=donor.id,
        attempts=attempts,
        query_class=query_class,
    )


def generate_cf(
    query: Case,
    model: MlpModel,
    casebase: CaseBase,
    xcs: Sequence[ExplanationCase],
    max_attempts: int = MAX_ATTEMPTS,
    tau: float = DEFAULT_TAU,
    target_class: Optional[int] = None,
    allow_fallback: bool = True,
) -> Counterfactual:
    """
    Case-based counterfactual:
      1) order explanation cases by the query's distance to their like member
      2) copy the donor's difference features into the query
      3) accept the first candidate the model predicts into another class
      4) after ``max_attempts`` rejected candidates, copy the nearest unlike neighbor
    """
    model.require_classifier("case-based counterfactuals")
    if max_attempts < 0:
        raise ExplanationError("max_attempts must be non-negative")
    if target_class is not None and not 0 <= target_class < max(1, casebase.schema.n_classes):
        raise ExplanationError(f"target class {target_class} is out of range")
    query_class = _model_class(model, query.features)
    if target_class is not None and target_class == query_class:
        raise ExplanationError(f"query is already predicted in target class {target_class}")

    case_classes = predicted_classes(model, casebase)
    for cf in iter_case_based_counterfactuals(
        query, model, casebase, xcs, tau, target_class, max_attempts, case_classes
    ):
        logger.info(f"Query {query.id}: counterfactual from xc {cf.explanation_case} after {cf.attempts} attempts")
        return cf
    attempts = min(max_attempts, len(xcs))

    if not allow_fallback:
        raise ExplanationError(f"no explanation case yields a counterfactual for query {query.id}")
    try:
        return _fallback(query, query_class, model, casebase, case_classes, tau, target_class, attempts)
    except RetrievalError as exc:
        raise ExplanationError(f"no counterfactual exists for query {query.id}: {exc}") from None
