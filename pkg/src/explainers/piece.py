import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy.stats import norm

from src.config import DEFAULT_ALPHA
from src.data.casebase import Case, CaseBase
from src.data.encoding import encode_case, encode_rows
from src.errors import ExplanationError, ModelError
from src.models.mlp import MlpModel, forward, forward_batch, head_predict
from src.retrieval.knn import VectorIndex, build_latent_index, realize_case

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HurdleStats:
    """
    Per predicted class c and latent feature j: probability of a positive
    activation, and mean/std of the positive activations. Arrays are (C, p).
    """

    p_pos: np.ndarray
    mu_pos: np.ndarray
    sd_pos: np.ndarray
    n: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.p_pos.shape[0]

    @property
    def expected(self) -> np.ndarray:
        return self.p_pos * self.mu_pos

    def usable(self, c: int) -> bool:
        return 0 <= c < self.n_classes and self.n[c] > 0


class Reason(str, Enum):
    ZERO_WHERE_POSITIVE = "zero-where-usually-positive"
    POSITIVE_WHERE_ZERO = "positive-where-usually-zero"
    TAIL_VALUE = "tail-value"


@dataclass(frozen=True)
class ExceptionalFeature:
    index: int
    value: float
    score: float
    expected: float
    reason: Reason


@dataclass(frozen=True)
class PerturbationStep:
    feature: int
    old_value: float
    new_value: float
    predicted_class: int


@dataclass(frozen=True)
class PieceResult:
    query_id: int
    query_class: int
    target_class: int
    query_latent: np.ndarray
    exceptional: List[ExceptionalFeature]
    steps: List[PerturbationStep]
    semifactual_latent: np.ndarray
    # nearest training case in latent space; retrieved, not synthesized
    semifactual_case: Case
    counterfactual_latent: Optional[np.ndarray]
    counterfactual_case: Optional[Case]
    steps_to_flip: Optional[int]
    # the semi-factual is the unmodified query
    degenerate: bool

    @property
    def flipped(self) -> bool:
        return self.counterfactual_latent is not None


def hurdle_from_activations(latents: np.ndarray, classes: np.ndarray, n_classes: int) -> HurdleStats:
    latents = np.asarray(latents, dtype=float)
    classes = np.asarray(classes, dtype=int)
    width = latents.shape[1]
    p_pos = np.zeros((n_classes, width))
    mu_pos = np.zeros((n_classes, width))
    sd_pos = np.zeros((n_classes, width))
    n = np.zeros(n_classes, dtype=int)
    for c in range(n_classes):
        members = latents[classes == c]
        n[c] = members.shape[0]
        if n[c] == 0:
            logger.warning(f"No training case is predicted in class {c}; hurdle stats unusable for it")
            continue
        positive = members > 0.0
        p_pos[c] = positive.mean(axis=0)
        for j in range(width):
            values = members[positive[:, j], j]
            if values.size:
                mu_pos[c, j] = values.mean()
                sd_pos[c, j] = values.std()
    return HurdleStats(p_pos=p_pos, mu_pos=mu_pos, sd_pos=sd_pos, n=n)


def fit_hurdle(model: MlpModel, casebase: CaseBase) -> HurdleStats:
    """Hurdle statistics over penultimate activations, partitioned by model-predicted class."""
    if not model.is_classifier:
        raise ModelError("hurdle statistics need a classification head")
    fp = forward_batch(model, encode_rows(model.encoder, [c.features for c in casebase.cases]))
    classes = np.argmax(fp.logits, axis=1)
    stats = hurdle_from_activations(fp.penultimate, classes, model.n_outputs)
    logger.info(f"Fitted hurdle stats over {len(casebase)} cases, class counts {stats.n.tolist()}")
    return stats


def _tail_probability(value: float, mu: float, sd: float) -> float:
    if sd == 0.0:
        return 1.0 if value == mu else 0.0
    return float(2.0 * norm.sf(abs(value - mu) / sd))


def exceptional_features(
    stats: HurdleStats, latent: np.ndarray, target_class: int, alpha: float = DEFAULT_ALPHA
) -> List[ExceptionalFeature]:
    """Latent features improbable under the target class, most exceptional first."""
    if not stats.usable(target_class):
        raise ExplanationError(f"hurdle stats are unusable for target class {target_class}")
    if not 0.0 <= alpha < 0.5:
        raise ExplanationError(f"alpha must lie in [0, 0.5), got {alpha}")
    latent = np.asarray(latent, dtype=float)
    p, mu, sd = stats.p_pos[target_class], stats.mu_pos[target_class], stats.sd_pos[target_class]
    expected = stats.expected[target_class]

    found: List[ExceptionalFeature] = []
    for j, a in enumerate(latent):
        if a <= 0.0:
            score, reason = 1.0 - p[j], Reason.ZERO_WHERE_POSITIVE
        elif p[j] < alpha:
            score, reason = p[j], Reason.POSITIVE_WHERE_ZERO
        else:
            score, reason = _tail_probability(a, mu[j], sd[j]), Reason.TAIL_VALUE
        if score < alpha:
            found.append(ExceptionalFeature(j, float(a), float(score), float(expected[j]), reason))
    # stable: equal scores keep feature order
    found.sort(key=lambda f: f.score)
    return found


def generate_sf_cf(
    model: MlpModel,
    stats: HurdleStats,
    casebase: CaseBase,
    query: Case,
    target_class: int,
    alpha: float = DEFAULT_ALPHA,
    index: Optional[VectorIndex] = None,
) -> PieceResult:
    """
    Walk the query's latent vector toward ``target_class``: set each
    exceptional feature to its expected value in that class, re-evaluating
    the output head after every step. The first state predicted as the target
    is the counterfactual; the last state still in the query's class is the
    semi-factual. Both are realized as nearest training cases in latent space.
    """
    latent = forward(model, encode_case(model.encoder, query)).penultimate
    query_class = head_predict(model, latent)
    if query_class == target_class:
        raise ExplanationError(f"query is already predicted in target class {target_class}")
    exceptional = exceptional_features(stats, latent, target_class, alpha)
    if not exceptional:
        logger.warning(f"Query {query.id}: no exceptional features for class {target_class} at alpha={alpha}")

    state = latent.copy()
    semifactual = latent.copy()
    counterfactual = None
    steps_to_flip = None
    steps: List[PerturbationStep] = []
    for number, feature in enumerate(exceptional, start=1):
        old = float(state[feature.index])
        state[feature.index] = feature.expected
        predicted = head_predict(model, state)
        steps.append(PerturbationStep(feature.index, old, feature.expected, predicted))
        if predicted == target_class:
            counterfactual = state.copy()
            steps_to_flip = number
            break
        if predicted == query_class:
            semifactual = state.copy()
    if counterfactual is None:
        logger.info(f"Query {query.id}: {len(steps)} perturbations did not reach class {target_class}")

    degenerate = bool(np.array_equal(semifactual, latent))
    if degenerate and counterfactual is not None:
        logger.warning(f"Query {query.id}: first perturbation crossed the boundary; semi-factual is the query")

    if index is None:
        index = build_latent_index(model, casebase)
    return PieceResult(
        query_id=query.id,
        query_class=query_class,
        target_class=target_class,
        query_latent=latent,
        exceptional=exceptional,
        steps=steps,
        semifactual_latent=semifactual,
        semifactual_case=realize_case(semifactual, casebase, model, index),
        counterfactual_latent=counterfactual,
        counterfactual_case=None if counterfactual is None else realize_case(counterfactual, casebase, model, index),
        steps_to_flip=steps_to_flip,
        degenerate=degenerate,
    )
