import logging
from pathlib import Path
from types import SimpleNamespace
from typing import Any, Dict, Optional, Sequence

import typer

from src.data.casebase import Case, CaseBase, align_class_labels
from src.data.loaders import load_tabular_csv
from src.errors import DataError, ExplanationError, SchemaError
from src.models.mlp import MlpModel
from src.models.persistence import load_model
from src.reports.emit import build_report, emit_report, report_json
from src.cli.options import provenance_config

logger = logging.getLogger(__name__)


def load_model_and_data(opts: SimpleNamespace):
    """Model plus a case base whose class indices follow the model's class order."""
    model = load_model(Path(opts.model))
    task = "classification" if model.is_classifier else "regression"
    casebase = load_tabular_csv(Path(opts.data), opts.label, task=task)
    if model.encoder is not None:
        expected = [f"{f.name}:{f.kind.value}" for f in model.encoder.features]
        found = [f"{s.name}:{s.kind.value}" for s in casebase.schema.features]
        if expected != found:
            raise SchemaError(f"{opts.data} columns {found} do not match the model's inputs {expected}")
    if model.is_classifier and model.class_labels:
        casebase = align_class_labels(casebase, model.class_labels)
    return model, casebase


def pick_query(casebase: CaseBase, index: int) -> Case:
    if not 0 <= index < len(casebase):
        raise DataError(f"query index {index} is out of range for {len(casebase)} cases")
    return casebase.cases[index]


def resolve_class(class_labels: Sequence[str], value: Optional[Any]) -> Optional[int]:
    """A class given by label, or by index when no label matches."""
    if value is None:
        return None
    text = str(value)
    if text in class_labels:
        return list(class_labels).index(text)
    try:
        index = int(text)
    except ValueError:
        raise ExplanationError(f"unknown class '{text}'; known classes {list(class_labels)}") from None
    if not 0 <= index < len(class_labels):
        raise ExplanationError(f"class index {index} is out of range")
    return index


def case_payload(case: Case, casebase: CaseBase, **extra) -> Dict[str, Any]:
    schema = casebase.schema
    payload = {"id": case.id, "features": dict(zip(schema.names, case.features))}
    if schema.task == "classification" and case.label < len(schema.class_labels):
        payload["label"] = schema.class_labels[case.label]
    if case.outcome is not None:
        payload["outcome"] = case.outcome
    payload.update(extra)
    return payload


def class_name(model: MlpModel, index: int) -> str:
    return model.class_labels[index] if index < len(model.class_labels) else str(index)


def finish(
    kind: str,
    payload: Dict[str, Any],
    opts: SimpleNamespace,
    default_out: str,
    model: Optional[MlpModel] = None,
) -> Path:
    """Write the report to --out and print its path (or the report under --stdout)."""
    report = build_report(kind, payload, provenance_config(opts), seed=opts.seed, model=model)
    out = emit_report(report, Path(opts.out or default_out))
    typer.echo(report_json(report) if opts.stdout else str(out))
    return out


def announce(path: Path) -> None:
    """Non-report artifacts (models, datasets): stdout carries the path."""
    typer.echo(str(path))
