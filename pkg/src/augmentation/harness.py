import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import accuracy_score, f1_score, recall_score

from src.config import THREADS
from src.data.casebase import CaseBase
from src.data.encoding import InputEncoder, encode_rows
from src.errors import AugmentationError, SchemaError
from src.models.mlp import TrainConfig, init_model, predict_batch, train_sgd
from src.reports.schemas import ComparisonTable, VariantMetrics

logger = logging.getLogger(__name__)

DEFAULT_HIDDEN = (16,)


def _check_variants(
    base: CaseBase, variants: Sequence[Tuple[str, CaseBase]], holdout: CaseBase
) -> None:
    for name, variant in [("holdout", holdout), *variants]:
        if not base.schema.same_features(variant.schema):
            raise SchemaError(f"variant '{name}' does not share the base schema")
        if variant.schema.class_labels != base.schema.class_labels:
            raise SchemaError(f"variant '{name}' orders its class labels differently from the base")
    held = {c.features for c in holdout.cases}
    for name, variant in [("base", base), *variants]:
        overlap = held.intersection(c.features for c in variant.cases)
        if overlap:
            raise AugmentationError(
                f"holdout overlaps training variant '{name}' in {len(overlap)} feature vectors"
            )


def evaluate_holdout(model, holdout: CaseBase, class_labels: List[str]) -> Tuple[float, dict, float]:
    X = encode_rows(model.encoder, [c.features for c in holdout.cases])
    predicted = predict_batch(model, X)
    truth = holdout.labels
    labels = list(range(len(class_labels)))
    accuracy = float(accuracy_score(truth, predicted))
    recall = recall_score(truth, predicted, labels=labels, average=None, zero_division=0)
    macro_f1 = float(f1_score(truth, predicted, labels=labels, average="macro", zero_division=0))
    return accuracy, {name: float(r) for name, r in zip(class_labels, recall)}, macro_f1


def retrain_eval(
    base: CaseBase,
    variants: Sequence[Tuple[str, CaseBase]],
    holdout: CaseBase,
    train_config: TrainConfig,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    threads: Optional[int] = None,
) -> ComparisonTable:
    """
    Train a fresh model (same seed and config) on the base and on every
    variant, then score each on the holdout. Rows keep input order, base first.
    All runs share the base case base's input encoder.
    """
    if base.schema.task != "classification":
        raise AugmentationError("retrain_eval scores classifiers only")
    _check_variants(base, variants, holdout)
    encoder = InputEncoder.from_casebase(base)
    class_labels = list(base.schema.class_labels)
    runs = [("base", base), *variants]

    def run(item: Tuple[str, CaseBase]) -> VariantMetrics:
        name, training = item
        model = init_model(
            [encoder.width, *hidden, len(class_labels)],
            seed=train_config.seed,
            encoder=encoder,
            class_labels=class_labels,
        )
        trained, _ = train_sgd(model, training, train_config)
        accuracy, recall, macro_f1 = evaluate_holdout(trained, holdout, class_labels)
        logger.info(f"Variant '{name}' ({len(training)} cases): accuracy={accuracy:.4f} macro_f1={macro_f1:.4f}")
        return VariantMetrics(
            name=name, n_train=len(training), accuracy=accuracy, recall=recall, macro_f1=macro_f1
        )

    with ThreadPoolExecutor(max_workers=max(1, threads or THREADS)) as pool:
        rows = list(pool.map(run, runs))
    return ComparisonTable(holdout_size=len(holdout), class_labels=class_labels, rows=rows)


def minority_gap(casebase: CaseBase, target_class: int) -> int:
    """Cases needed to bring ``target_class`` level with the largest class."""
    counts = np.bincount(casebase.labels, minlength=casebase.schema.n_classes)
    return int(counts.max() - counts[target_class])
