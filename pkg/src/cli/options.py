import logging
from pathlib import Path
from types import SimpleNamespace
from typing import Any, Dict, Optional

import click
import typer

from src.config import THREADS
from src.data.loaders import load_json
from src.errors import DataError

logger = logging.getLogger(__name__)

# Flags every command accepts
SeedOpt = typer.Option(None, "--seed", help="Seed for every random draw (default 0).")
OutOpt = typer.Option(None, "--out", help="Output file.")
ConfigOpt = typer.Option(None, "--config", help="JSON file of flag values; explicit flags win.")
StdoutOpt = typer.Option(None, "--stdout/--no-stdout", help="Print the report instead of its path.")
ThreadsOpt = typer.Option(None, "--threads", help="Worker thread cap.")

# Flags shared by several commands
ModelOpt = typer.Option(None, "--model", help="Model file written by `train`.")
DataOpt = typer.Option(None, "--data", help="CSV case base (or TSV series for ts-cf).")
LabelOpt = typer.Option(None, "--label", help="Label column name (default 'label').")
QueryOpt = typer.Option(None, "--query-index", help="Row of the query in --data.")
TauOpt = typer.Option(None, "--tau", help="Match tolerance on normalized features.")
TargetOpt = typer.Option(None, "--target-class", help="Class label (or index) to move toward.")

GLOBAL_DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "out": None,
    "stdout": False,
    "threads": THREADS,
}

# Never part of the provenance hash: they only say where output goes
_OUTPUT_KEYS = ("out", "stdout", "config")


def _normalize_keys(values: Dict[str, Any]) -> Dict[str, Any]:
    return {str(k).replace("-", "_"): v for k, v in values.items()}


def load_config_file(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    raw = load_json(path)
    if not isinstance(raw, dict):
        raise DataError(f"config file {path} must hold a JSON object")
    return _normalize_keys(raw)


def resolve(explicit: Dict[str, Any], defaults: Dict[str, Any]) -> SimpleNamespace:
    """
    Merge option values: command defaults < config file < explicit flags.
    Flags left unset arrive as None.
    """
    known = {**GLOBAL_DEFAULTS, **defaults}
    file_values = load_config_file(explicit.get("config"))
    unknown = set(file_values) - set(known)
    if unknown:
        logger.debug(f"Ignoring unknown config keys: {sorted(unknown)}")

    merged = dict(known)
    merged.update({k: v for k, v in file_values.items() if k in known and v is not None})
    merged.update({k: v for k, v in explicit.items() if k in known and v is not None})
    merged["config"] = explicit.get("config")
    return SimpleNamespace(**merged)


def require(opts: SimpleNamespace, *names: str) -> None:
    for name in names:
        if getattr(opts, name, None) is None:
            raise click.UsageError(f"Missing option '--{name.replace('_', '-')}'.")


def provenance_config(opts: SimpleNamespace) -> Dict[str, Any]:
    return {
        k: str(v) if isinstance(v, Path) else v
        for k, v in sorted(vars(opts).items())
        if k not in _OUTPUT_KEYS
    }


def parse_ints(text: Any) -> list:
    """"16,8" or [16, 8] -> [16, 8]; an empty string means no hidden layer."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text).strip()
    if not text:
        return []
    try:
        return [int(part) for part in text.split(",")]
    except ValueError:
        raise click.UsageError(f"expected comma-separated integers, got '{text}'") from None
