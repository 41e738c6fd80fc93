import json

import pandas as pd
import pytest

from src.cli.main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, run
from src.cli.options import parse_ints, resolve


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def trained(workdir):
    """Small blob data set and a model trained on it, written through the CLI."""
    assert run(["synth", "blobs", "--n-per-class", "20", "--seed", "1", "--out", "blobs.csv"]) == EXIT_OK
    assert run(
        ["train", "--data", "blobs.csv", "--hidden", "4", "--epochs", "40", "--out", "model.json"]
    ) == EXIT_OK
    return workdir


def test_version_flag(capsys):
    assert run(["--version"]) == EXIT_OK
    assert "twincbr" in capsys.readouterr().out


def test_synth_is_deterministic(workdir):
    """Same seed, same bytes."""
    for name in ("a.csv", "b.csv"):
        assert run(["synth", "blobs", "--seed", "7", "--out", name]) == EXIT_OK
    assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()


def test_synth_series_writes_tsv(workdir):
    assert run(["synth", "series", "--n-per-class", "3", "--length", "8", "--out", "s.tsv"]) == EXIT_OK
    rows = (workdir / "s.tsv").read_text().splitlines()
    assert len(rows) == 6
    assert all(len(r.split("\t")) == 9 for r in rows)


def test_missing_required_option_is_a_usage_error(workdir, capsys):
    assert run(["explain", "factual", "--data", "x.csv", "--query-index", "0"]) == EXIT_USAGE
    assert "Missing option '--model'" in capsys.readouterr().err


def test_unknown_subcommand_is_a_usage_error(capsys):
    assert run(["explain", "nonsense"]) == EXIT_USAGE
    assert "error:" in capsys.readouterr().err


def test_missing_data_file_is_a_failure(workdir):
    assert run(["train", "--data", "nowhere.csv"]) == EXIT_FAILURE


def test_malformed_model_file_is_a_failure(trained):
    (trained / "bad.json").write_text("{")
    code = run(["explain", "factual", "--model", "bad.json", "--data", "blobs.csv", "--query-index", "0"])
    assert code == EXIT_FAILURE


def test_out_of_range_training_value_is_a_usage_error(workdir):
    assert run(["synth", "blobs", "--out", "blobs.csv"]) == EXIT_OK
    assert run(["train", "--data", "blobs.csv", "--epochs", "0"]) == EXIT_USAGE


def test_fidelity_report(trained):
    assert run(["eval", "fidelity", "--model", "model.json", "--data", "blobs.csv", "--k", "3"]) == EXIT_OK
    report = json.loads((trained / "fidelity-report.json").read_text())
    assert report["kind"] == "fidelity"
    assert report["provenance"]["seed"] == 0
    for key in ("fidelity", "feature_fidelity", "latent_fidelity"):
        assert 0.0 <= report["payload"][key] <= 1.0
    assert report["payload"]["n_eval"] == 40


def test_fidelity_csv_format(trained, mocker):
    scores = {"fidelity": 0.9, "feature_fidelity": 0.8, "latent_fidelity": 0.85}
    patched = mocker.patch("src.cli.commands.evaluate.fidelity_report", return_value=scores)
    code = run(
        ["eval", "fidelity", "--model", "model.json", "--data", "blobs.csv", "--format", "csv", "--out", "f.csv"]
    )
    assert code == EXIT_OK
    assert patched.call_args.kwargs["exclude_self"] is True
    frame = pd.read_csv(trained / "f.csv")
    assert frame.loc[0, "fidelity"] == 0.9
    assert frame.loc[0, "k"] == 3


def test_unknown_format_is_a_usage_error(trained):
    code = run(["eval", "fidelity", "--model", "model.json", "--data", "blobs.csv", "--format", "xml"])
    assert code == EXIT_USAGE


def test_factual_report_on_stdout(trained, capsys):
    capsys.readouterr()
    code = run(
        ["explain", "factual", "--model", "model.json", "--data", "blobs.csv", "--query-index", "3", "--k", "2", "--stdout"]
    )
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["kind"] == "factual"
    neighbors = report["payload"]["neighbors"]
    assert len(neighbors) == 2
    assert all(n["id"] != report["payload"]["query"]["id"] for n in neighbors)
    assert (trained / "factual-report.json").exists()


def test_casebased_counterfactual_report(trained):
    code = run(
        ["explain", "cf", "--model", "model.json", "--data", "blobs.csv", "--query-index", "0", "--out", "cf.json"]
    )
    assert code == EXIT_OK
    payload = json.loads((trained / "cf.json").read_text())["payload"]
    assert payload["counterfactual"]["provenance"] in ("explanation_case", "nun_fallback")
    assert payload["metrics"]["valid"] == payload["counterfactual"]["valid"]
    assert len(payload["before"]) == len(payload["after"]) == 2


def test_unknown_cf_method_is_a_usage_error(trained):
    code = run(
        ["explain", "cf", "--method", "dice", "--model", "model.json", "--data", "blobs.csv", "--query-index", "0"]
    )
    assert code == EXIT_USAGE


def test_query_index_out_of_range_is_a_failure(trained):
    code = run(["explain", "factual", "--model", "model.json", "--data", "blobs.csv", "--query-index", "999"])
    assert code == EXIT_FAILURE


def test_smote_augmentation_writes_synthetic_cases(trained):
    code = run(
        ["augment", "--method", "smote", "--data", "blobs.csv", "--target-class", "1", "--count", "4", "--out", "synth.csv"]
    )
    assert code == EXIT_OK
    frame = pd.read_csv(trained / "synth.csv")
    assert len(frame) == 4
    assert set(frame["label"].astype(str)) == {"1"}


def test_counterfactual_on_a_regression_model_is_a_failure(trained):
    assert run(
        ["train", "--task", "regression", "--data", "blobs.csv", "--hidden", "4", "--epochs", "5", "--out", "reg.json"]
    ) == EXIT_OK
    code = run(["explain", "cf", "--model", "reg.json", "--data", "blobs.csv", "--query-index", "0", "--out", "cf.json"])
    assert code == EXIT_FAILURE
    assert not (trained / "cf.json").exists()


def test_text_in_a_numeric_column_is_a_failure(trained, capsys):
    frame = pd.read_csv(trained / "blobs.csv")
    frame["f0"] = frame["f0"].astype(object)
    frame.loc[0, "f0"] = "x"
    frame.to_csv(trained / "text.csv", index=False)
    code = run(["explain", "factual", "--model", "model.json", "--data", "text.csv", "--query-index", "0"])
    assert code == EXIT_FAILURE
    assert "error:" in capsys.readouterr().err


def test_tau_out_of_range_is_a_failure(trained):
    code = run(
        ["explain", "cf", "--model", "model.json", "--data", "blobs.csv", "--query-index", "0", "--tau", "1.5"]
    )
    assert code == EXIT_FAILURE


# --- option resolution ---

def test_explicit_flags_beat_config_file_beat_defaults(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"k": 7, "seed": 1, "query-index": 4}))
    opts = resolve({"config": config, "k": None, "seed": 5}, {"k": 3, "query_index": None})
    assert opts.k == 7
    assert opts.seed == 5
    assert opts.query_index == 4


def test_parse_ints():
    assert parse_ints("16,8") == [16, 8]
    assert parse_ints("") == []
    assert parse_ints([4]) == [4]


def test_semifactual_report(trained):
    """Target the class the model does not predict for the query."""
    assert run(["explain", "factual", "--model", "model.json", "--data", "blobs.csv", "--query-index", "0"]) == EXIT_OK
    predicted = json.loads((trained / "factual-report.json").read_text())["payload"]["query"]["predicted"]
    target = "0" if predicted == "1" else "1"
    code = run(
        ["explain", "sf", "--model", "model.json", "--data", "blobs.csv", "--query-index", "0", "--target-class", target]
    )
    assert code == EXIT_OK
    report = json.loads((trained / "sf-report.json").read_text())
    assert report["kind"] == "semifactual"
    assert report["payload"]["target_class"] == target
    assert "case" in report["payload"]["semifactual"]


def test_semifactual_needs_a_target_class(trained):
    code = run(["explain", "sf", "--model", "model.json", "--data", "blobs.csv", "--query-index", "0"])
    assert code == EXIT_USAGE


def test_timeseries_counterfactual_report(workdir):
    assert run(["synth", "series", "--n-per-class", "15", "--length", "32", "--out", "s.tsv"]) == EXIT_OK
    assert run(
        ["train", "--series", "--data", "s.tsv", "--hidden", "16", "--epochs", "80", "--out", "ts.json"]
    ) == EXIT_OK
    assert run(["explain", "ts-cf", "--model", "ts.json", "--data", "s.tsv", "--query-index", "0"]) == EXIT_OK
    payload = json.loads((workdir / "ts-cf-report.json").read_text())["payload"]
    assert len(payload["counterfactual"]) == len(payload["importance"]["values"]) == 32
    assert payload["window"]["start"] <= payload["window"]["end"]
    assert payload["importance"]["window"] == 3


def test_augmentation_comparison(trained):
    assert run(["synth", "blobs", "--n-per-class", "10", "--seed", "2", "--out", "holdout.csv"]) == EXIT_OK
    assert run(
        ["augment", "--method", "smote", "--data", "blobs.csv", "--target-class", "1", "--count", "6", "--out", "smote.csv"]
    ) == EXIT_OK
    code = run(
        [
            "eval", "augment", "--base", "blobs.csv", "--variants", "smote.csv", "--holdout", "holdout.csv",
            "--hidden", "4", "--epochs", "10", "--out", "cmp.json",
        ]
    )
    assert code == EXIT_OK
    table = json.loads((trained / "cmp.json").read_text())["payload"]["comparison"]
    assert [r["name"] for r in table["rows"]] == ["base", "smote"]
    assert table["rows"][1]["n_train"] == table["rows"][0]["n_train"] + 6
    assert table["holdout_size"] == 20
