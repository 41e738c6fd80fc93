import logging
from typing import Optional

import numpy as np

from src.config import (
    DEFAULT_TAU,
    WACHTER_LAMBDA,
    WACHTER_LAMBDA_EVERY,
    WACHTER_MAX_ITERS,
    WACHTER_STEP,
)
from src.data.casebase import Case, Scaler, diff_features
from src.data.encoding import encode_case
from src.errors import ExplanationError, ModelError
from src.explainers.casebased import PROVENANCE_WACHTER, Counterfactual
from src.models.mlp import MlpModel, forward, input_jacobian

logger = logging.getLogger(__name__)


def _decode(model: MlpModel, query: Case, z: np.ndarray):
    if model.encoder is None:
        return tuple(float(v) for v in z)
    return model.encoder.decode_numeric(query.features, z)


def wachter_cf(
    query: Case,
    model: MlpModel,
    target_class: int,
    scaler: Optional[Scaler] = None,
    lam: float = WACHTER_LAMBDA,
    lambda_every: int = WACHTER_LAMBDA_EVERY,
    step: float = WACHTER_STEP,
    max_iters: int = WACHTER_MAX_ITERS,
    tau: float = DEFAULT_TAU,
) -> Counterfactual:
    """
    Gradient counterfactual on lam * (p_target(x') - 1)^2 + ||x' - x||^2 over
    the normalized numeric inputs; categorical columns stay frozen.
    lam doubles every ``lambda_every`` steps until the model predicts ``target_class``.
    """
    if not model.is_classifier:
        raise ModelError("the gradient counterfactual needs a classification head")
    if not 0 <= target_class < model.n_outputs:
        raise ExplanationError(f"target class {target_class} is out of range")
    if max_iters < 0 or lambda_every < 1:
        raise ExplanationError("max_iters must be >= 0 and lambda_every >= 1")

    z0 = encode_case(model.encoder, query)
    query_class = int(np.argmax(forward(model, z0).logits))
    columns = (
        np.arange(z0.size) if model.encoder is None else np.array(model.encoder.numeric_columns(), dtype=int)
    )
    mask = np.zeros(z0.size, dtype=bool)
    mask[columns] = True

    z = z0.copy()
    iterations = 0
    weight = lam
    while iterations < max_iters and int(np.argmax(forward(model, z).logits)) != target_class:
        if iterations and iterations % lambda_every == 0:
            weight *= 2.0
        probs = forward(model, z).probs
        jac = input_jacobian(model, z)
        p_t = probs[target_class]
        # d p_t / dz through the softmax
        dp = p_t * (jac[target_class] - probs @ jac)
        grad = 2.0 * weight * (p_t - 1.0) * dp + 2.0 * (z - z0)
        z = z - step * np.where(mask, grad, 0.0)
        iterations += 1

    final_class = int(np.argmax(forward(model, z).logits))
    instance = query.features if iterations == 0 else _decode(model, query, z)
    if scaler is not None:
        changed = diff_features(query, Case(id=-1, features=instance), scaler, tau)
    else:
        changed = frozenset(int(i) for i in np.flatnonzero(np.abs(z - z0) > tau))
    valid = final_class != query_class
    logger.info(
        f"Gradient counterfactual for query {query.id}: {iterations} iterations, "
        f"class {query_class} -> {final_class}, valid={valid}"
    )
    return Counterfactual(
        query_id=query.id,
        query_features=query.features,
        instance=instance,
        changed_features=changed,
        target_class=final_class,
        valid=valid,
        provenance=PROVENANCE_WACHTER,
        iterations=iterations,
        query_class=query_class,
    )
