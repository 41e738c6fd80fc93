import dataclasses
import hashlib
import json
import logging
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from src.config import REPORT_SCHEMA_VERSION, VERSION
from src.errors import DataError
from src.models.mlp import MlpModel
from src.models.persistence import model_fingerprint
from src.reports.schemas import Provenance, Report

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def version_string() -> str:
    return f"twincbr {VERSION} (report schema {REPORT_SCHEMA_VERSION})"


def jsonable(value: Any) -> Any:
    """Plain JSON types for numpy arrays/scalars, dataclasses, pydantic models, sets and enums."""
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (frozenset, set)):
        return sorted(jsonable(v) for v in value)
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def config_hash(config: Dict[str, Any]) -> str:
    canonical = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_report(
    kind: str,
    payload: Dict[str, Any],
    config: Dict[str, Any],
    seed: Optional[int] = None,
    model: Optional[MlpModel] = None,
) -> Report:
    return Report(
        kind=kind,
        created_at=datetime.now(timezone.utc),
        provenance=Provenance(
            seed=seed,
            config_hash=config_hash(config),
            model_fingerprint=model_fingerprint(model) if model is not None else None,
            version=version_string(),
        ),
        payload=jsonable(payload),
    )


def report_json(report: Report) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True)


def emit_report(report: Report, path: PathLike) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report_json(report), encoding="utf-8")
    logger.info(f"Wrote {report.kind} report to {out}")
    return out


def load_report(path: PathLike) -> Report:
    try:
        return Report.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise DataError(f"malformed report {path}: {exc}") from None


def export_metrics_csv(rows: List[Dict[str, Any]], path: PathLike) -> Path:
    """Flat metrics table, one row per explanation or variant; nested dicts become dotted columns."""
    out = Path(path)
    pd.json_normalize(jsonable(rows)).to_csv(out, index=False)
    return out
