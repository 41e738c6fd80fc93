import json

import numpy as np
import pandas as pd
import pytest

from src.data.casebase import Case
from src.errors import DataError
from src.explainers.casebased import generate_cf, mine_explanation_cases
from src.reports.emit import (
    build_report,
    config_hash,
    emit_report,
    export_metrics_csv,
    jsonable,
    load_report,
    report_json,
)
from src.reports.metrics import diversity, evaluate_explanation, native_pair_distance
from src.tests.conftest import hand_model, make_casebase


@pytest.fixture
def threshold_model():
    """Class 1 iff the second feature exceeds 2.5."""
    return hand_model([[[0.0, -1.0], [0.0, 1.0]]], biases=[[2.5, -2.5]])


def test_identity_instance_has_zero_proximity_and_sparsity(threshold_model, tiny_casebase):
    query = tiny_casebase.cases[0]
    metrics = evaluate_explanation(query, query.features, threshold_model, tiny_casebase, [])
    assert metrics.proximity == 0.0
    assert metrics.sparsity == 0
    assert not metrics.valid
    assert metrics.relative_cf_distance is None


def test_in_sample_instance_is_fully_plausible(threshold_model, tiny_casebase):
    query = Case(id=99, features=(0.5, 1.0))
    metrics = evaluate_explanation(
        query, tiny_casebase.cases[3].features, threshold_model, tiny_casebase, []
    )
    assert metrics.plausibility == 0.0
    assert metrics.valid
    assert metrics.sparsity == 2


def test_relative_distance_against_native_pairs(threshold_model, tiny_casebase):
    xcs = mine_explanation_cases(tiny_casebase, tau=0.1)
    native = native_pair_distance(tiny_casebase, xcs)
    query = tiny_casebase.cases[0]
    metrics = evaluate_explanation(query, (0.0, 10.0), threshold_model, tiny_casebase, xcs)
    assert metrics.relative_cf_distance == pytest.approx(metrics.proximity / native)


def test_metrics_are_repeatable(blob_model, blob_casebase):
    xcs = mine_explanation_cases(blob_casebase, tau=0.1)
    query = blob_casebase.cases[2]
    cf = generate_cf(query, blob_model, blob_casebase, xcs)
    a = evaluate_explanation(query, cf.instance, blob_model, blob_casebase, xcs)
    b = evaluate_explanation(query, cf.instance, blob_model, blob_casebase, xcs)
    assert a == b
    assert a.sparsity == len(cf.changed_features)
    assert a.valid == cf.valid


def test_diversity():
    cb = make_casebase([[0.0], [1.0]], [0, 1])
    assert diversity([(0.5,), (0.5,)], cb.scaler) == 0.0
    assert diversity([(0.0,), (1.0,)], cb.scaler) == 1.0
    assert diversity([(0.0,)], cb.scaler) is None
    spread = [(0.0,), (0.2,), (0.9,)]
    assert diversity(spread, cb.scaler) == pytest.approx(diversity(spread[::-1], cb.scaler))


# --- emission ---

def test_report_round_trip(tmp_path, blob_model):
    """A written report parses back to an equal report."""
    payload = {"instance": np.array([1.5, 2.0]), "changed": frozenset({1, 0}), "score": np.float64(0.25)}
    report = build_report("cf", payload, {"tau": 0.1, "k": 3}, seed=7, model=blob_model)
    path = emit_report(report, tmp_path / "out" / "report.json")
    loaded = load_report(path)
    assert loaded == report
    assert loaded.payload == {"instance": [1.5, 2.0], "changed": [0, 1], "score": 0.25}


def test_report_carries_seed_and_config_hash():
    config = {"tau": 0.1, "k": 3}
    report = build_report("factual", {}, config, seed=11)
    raw = json.loads(report_json(report))
    assert raw["provenance"]["seed"] == 11
    assert raw["provenance"]["config_hash"] == config_hash({"k": 3, "tau": 0.1})
    assert raw["provenance"]["model_fingerprint"] is None
    assert raw["schema_version"] == report.schema_version


def test_config_hash_distinguishes_configs():
    assert config_hash({"tau": 0.1}) != config_hash({"tau": 0.2})


def test_jsonable_replaces_non_finite_floats():
    assert jsonable({"a": float("inf"), "b": (1, 2)}) == {"a": None, "b": [1, 2]}


def test_load_report_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"kind": "cf"}))
    with pytest.raises(DataError):
        load_report(path)


def test_metrics_csv_flattens_nested_columns(tmp_path):
    rows = [{"name": "base", "recall": {"A": 1.0, "B": 0.5}}]
    frame = pd.read_csv(export_metrics_csv(rows, tmp_path / "m.csv"))
    assert list(frame.columns) == ["name", "recall.A", "recall.B"]
    assert frame.loc[0, "recall.B"] == 0.5
