import numpy as np
import pytest
from dotenv import load_dotenv

load_dotenv()

from src.data.casebase import Case, CaseBase
from src.data.schema import FeatureKind, FeatureSchema, FeatureSpec
from src.data.synth import synth_blobs, synth_series
from src.models.mlp import MlpModel, TrainConfig, build_model, fit_arrays, init_model, train_sgd


def make_casebase(rows, labels, class_labels=("A", "B"), categorical=()):
    """Case base over features f0..f{d-1}; ``categorical`` lists string-valued columns."""
    dims = len(rows[0])
    features = [
        FeatureSpec(
            name=f"f{i}",
            kind=FeatureKind.CATEGORICAL if i in categorical else FeatureKind.NUMERIC,
        )
        for i in range(dims)
    ]
    schema = FeatureSchema(features=features, label_name="label", class_labels=list(class_labels))
    cases = [
        Case(id=i, features=tuple(row), label=int(lab))
        for i, (row, lab) in enumerate(zip(rows, labels))
    ]
    return CaseBase.build(schema, cases)


def hand_model(weights, biases=None, head="softmax", class_labels=None):
    """Model from explicit (out, in) weight matrices; no input encoder (raw inputs)."""
    weights = [np.asarray(w, dtype=float) for w in weights]
    if biases is None:
        biases = [np.zeros(w.shape[0]) for w in weights]
    sizes = [weights[0].shape[1]] + [w.shape[0] for w in weights]
    return MlpModel(
        layer_sizes=sizes,
        weights=weights,
        biases=[np.asarray(b, dtype=float) for b in biases],
        head=head,
        class_labels=list(class_labels or []),
    )


@pytest.fixture
def tiny_casebase():
    """Four 2-d cases, two per class."""
    return make_casebase([[0.0, 0.0], [1.0, 0.0], [0.0, 10.0], [1.0, 10.0]], [0, 0, 1, 1])


@pytest.fixture(scope="session")
def blob_casebase():
    return synth_blobs(40, 2, [[0.0, 0.0], [4.0, 4.0]], 1.0, seed=0)


@pytest.fixture(scope="session")
def blob_model(blob_casebase):
    """Small classifier trained on well-separated blobs."""
    model = build_model(blob_casebase, [8], seed=0)
    trained, _ = train_sgd(model, blob_casebase, TrainConfig(epochs=60, learning_rate=0.1, seed=0))
    return trained


@pytest.fixture(scope="session")
def series_dataset():
    return synth_series(30, 32, seed=0)


@pytest.fixture(scope="session")
def series_model(series_dataset):
    model = init_model(
        [series_dataset.length, 16, 2], seed=0, class_labels=series_dataset.class_labels
    )
    trained, _ = fit_arrays(
        model, series_dataset.values, series_dataset.labels, TrainConfig(epochs=80, seed=0)
    )
    return trained


@pytest.fixture
def blob_csv(tmp_path, blob_casebase):
    from src.data.loaders import save_tabular_csv

    return save_tabular_csv(blob_casebase, tmp_path / "blobs.csv")
