import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd
from pydantic import ValidationError

from src.data.casebase import Case, CaseBase
from src.data.schema import FeatureKind, FeatureSchema, FeatureSpec, SchemaHint
from src.data.timeseries import TimeSeriesDataset, build_dataset
from src.errors import DataError, SchemaError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _parse_real(text: str) -> Optional[float]:
    try:
        value = float(text)
    except (TypeError, ValueError):
        return None
    return value if math.isfinite(value) else None


def _read_rows(path: PathLike, sep: str) -> pd.DataFrame:
    """Read every cell as text, header row included, rejecting ragged rows."""
    try:
        frame = pd.read_csv(
            path, sep=sep, header=None, dtype=str, keep_default_na=False, encoding="utf-8"
        )
    except pd.errors.EmptyDataError:
        raise DataError(f"empty dataset: {path}") from None
    except pd.errors.ParserError as exc:
        raise DataError(f"ragged rows in {path}: {exc}") from None
    if frame.isna().to_numpy().any():
        raise DataError(f"ragged rows in {path}: some rows have missing fields")
    return frame


def _load_hint(schema_hint: PathLike) -> SchemaHint:
    try:
        return SchemaHint.model_validate_json(Path(schema_hint).read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise SchemaError(f"invalid schema hint {schema_hint}: {exc}") from None


def load_tabular_csv(
    path: PathLike,
    label_name: str,
    schema_hint: Optional[PathLike] = None,
    task: str = "classification",
) -> CaseBase:
    """
    Load a header-first CSV into a case base.

    A column is numeric iff every value parses as a finite real, unless the
    schema hint declares its kind. Ids are assigned 0..n-1 in file order and
    class labels are indexed in first-appearance order.
    """
    frame = _read_rows(path, sep=",")
    header = [str(h) for h in frame.iloc[0].tolist()]
    body = frame.iloc[1:]
    if label_name not in header:
        raise DataError(f"missing label column '{label_name}' in {path}")
    if body.empty:
        raise DataError(f"empty dataset: {path}")

    declared: Dict[str, FeatureKind] = {}
    if schema_hint is not None:
        hint = _load_hint(schema_hint)
        if hint.label is not None and hint.label != label_name:
            raise SchemaError(
                f"schema hint label '{hint.label}' does not match '{label_name}'"
            )
        declared = {f.name: f.kind for f in hint.features}
        unknown = set(declared) - set(header)
        if unknown:
            raise SchemaError(f"schema hint names unknown columns: {sorted(unknown)}")

    columns: Dict[str, List[str]] = {
        name: body.iloc[:, pos].tolist() for pos, name in enumerate(header)
    }

    specs: List[FeatureSpec] = []
    parsed: List[list] = []
    for name in header:
        if name == label_name:
            continue
        raw = columns[name]
        reals = [_parse_real(v) for v in raw]
        kind = declared.get(name)
        if kind is None:
            kind = FeatureKind.NUMERIC if all(r is not None for r in reals) else FeatureKind.CATEGORICAL
        if kind == FeatureKind.NUMERIC:
            bad = [v for v, r in zip(raw, reals) if r is None]
            if bad:
                raise DataError(
                    f"value '{bad[0]}' in column '{name}' does not conform to declared kind numeric"
                )
            specs.append(FeatureSpec(name=name, kind=kind, observed_range=(min(reals), max(reals))))
            parsed.append(reals)
        else:
            specs.append(FeatureSpec(name=name, kind=kind, categories=list(dict.fromkeys(raw))))
            parsed.append(raw)

    raw_labels = columns[label_name]
    if task == "regression":
        outcomes = [_parse_real(v) for v in raw_labels]
        if any(o is None for o in outcomes):
            raise DataError(f"regression target '{label_name}' must be numeric")
        class_labels: List[str] = []
    else:
        class_labels = list(dict.fromkeys(raw_labels))

    try:
        schema = FeatureSchema(
            features=specs, label_name=label_name, class_labels=class_labels, task=task
        )
    except ValidationError as exc:
        raise SchemaError(f"invalid schema for {path}: {exc}") from None

    cases = []
    for row in range(len(body)):
        features = tuple(col[row] for col in parsed)
        if task == "regression":
            cases.append(Case(id=row, features=features, outcome=outcomes[row]))
        else:
            cases.append(Case(id=row, features=features, label=class_labels.index(raw_labels[row])))

    casebase = CaseBase.build(schema, cases)
    logger.info(
        f"Loaded {len(casebase)} cases with {schema.n_features} features from {path}"
    )
    return casebase


def save_tabular_csv(casebase: CaseBase, path: PathLike) -> Path:
    """Write cases in id order using the same dialect the loader reads."""
    schema = casebase.schema
    data = {
        name: [c.features[i] for c in casebase.cases] for i, name in enumerate(schema.names)
    }
    if schema.task == "regression":
        data[schema.label_name] = [c.outcome for c in casebase.cases]
    else:
        data[schema.label_name] = [schema.class_labels[c.label] for c in casebase.cases]
    out = Path(path)
    pd.DataFrame(data, columns=schema.names + [schema.label_name]).to_csv(out, index=False)
    return out


def load_timeseries_tsv(path: PathLike) -> TimeSeriesDataset:
    """UCR-style TSV: first column is the class label, the rest are values."""
    frame = _read_rows(path, sep="\t")
    if frame.shape[1] < 2:
        raise DataError(f"{path}: need a label column and at least one value column")
    rows = []
    for row_index, row in enumerate(frame.itertuples(index=False)):
        values = [_parse_real(v) for v in row[1:]]
        if any(v is None for v in values):
            raise DataError(f"{path}: non-numeric value in row {row_index}")
        rows.append(values)
    labels = [str(v) for v in frame.iloc[:, 0].tolist()]
    dataset = build_dataset(rows, labels)
    logger.info(f"Loaded {len(dataset)} series of length {dataset.length} from {path}")
    return dataset


def save_timeseries_tsv(dataset: TimeSeriesDataset, path: PathLike) -> Path:
    out = Path(path)
    frame = pd.DataFrame(dataset.values)
    frame.insert(0, "label", [dataset.class_labels[i] for i in dataset.labels])
    frame.to_csv(out, sep="\t", header=False, index=False)
    return out


def load_json(path: PathLike) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from None
