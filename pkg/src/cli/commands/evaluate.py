import logging
from pathlib import Path
from typing import List, Optional, Tuple

import typer

from src.augmentation.harness import DEFAULT_HIDDEN, retrain_eval
from src.cli.common import finish, load_model_and_data
from src.cli.options import (
    ConfigOpt,
    DataOpt,
    LabelOpt,
    ModelOpt,
    OutOpt,
    SeedOpt,
    StdoutOpt,
    ThreadsOpt,
    parse_ints,
    require,
    resolve,
)
from src.data.casebase import Case, CaseBase, align_class_labels
from src.data.loaders import load_tabular_csv
from src.errors import SchemaError
from src.models.mlp import TrainConfig
from src.reports.emit import export_metrics_csv
from src.retrieval.fidelity import fidelity_report

logger = logging.getLogger(__name__)

app = typer.Typer(help="Evaluate the twin or an augmentation.", no_args_is_help=True)

FormatOpt = typer.Option(None, "--format", help="json report or flat csv metrics.")


def _write(kind: str, payload: dict, rows: List[dict], opts, default_stem: str, model=None) -> None:
    if opts.fmt == "csv":
        path = export_metrics_csv(rows, Path(opts.out or f"{default_stem}.csv"))
        typer.echo(str(path))
    elif opts.fmt == "json":
        finish(kind, payload, opts, f"{default_stem}.json", model=model)
    else:
        raise typer.BadParameter(f"unknown format '{opts.fmt}'", param_hint="--format")


@app.command("fidelity")
def fidelity(
    model: Optional[Path] = ModelOpt,
    data: Optional[Path] = DataOpt,
    label: Optional[str] = LabelOpt,
    k: Optional[int] = typer.Option(None, "--k"),
    holdout: Optional[Path] = typer.Option(None, "--holdout", help="Evaluate on these cases instead."),
    fmt: Optional[str] = FormatOpt,
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    config: Optional[Path] = ConfigOpt,
    stdout: Optional[bool] = StdoutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """Agreement between k-NN verdicts and the network, per retrieval space."""
    opts = resolve(
        dict(locals()),
        {"model": None, "data": None, "label": "label", "k": 3, "holdout": None, "fmt": "json"},
    )
    require(opts, "model", "data")
    net, casebase = load_model_and_data(opts)
    if opts.holdout is not None:
        held = load_tabular_csv(Path(opts.holdout), opts.label)
        held = align_class_labels(held, net.class_labels or casebase.schema.class_labels)
        scores = fidelity_report(net, casebase, list(held.cases), opts.k)
    else:
        # in-sample: leave each case out of its own neighborhood
        scores = fidelity_report(net, casebase, list(casebase.cases), opts.k, exclude_self=True)
    payload = {**scores, "k": opts.k, "n_eval": len(held) if opts.holdout is not None else len(casebase)}
    _write("fidelity", payload, [payload], opts, "fidelity-report", model=net)


def _variant(base: CaseBase, path: Path, label: str) -> Tuple[str, CaseBase]:
    """Base cases plus the synthetic cases in ``path``, re-identified after the base ids."""
    extra = load_tabular_csv(path, label)
    if not base.schema.same_features(extra.schema):
        raise SchemaError(f"{path} does not share the base schema")
    extra = align_class_labels(extra, base.schema.class_labels)
    start = base.next_id
    shifted = [
        Case(id=start + i, features=c.features, label=c.label) for i, c in enumerate(extra.cases)
    ]
    return path.stem, base.with_cases(shifted)


@app.command("augment")
def augment_eval(
    base: Optional[Path] = typer.Option(None, "--base", help="Un-augmented training CSV."),
    variants: Optional[str] = typer.Option(None, "--variants", help="Comma-separated synthetic-case CSVs."),
    holdout: Optional[Path] = typer.Option(None, "--holdout"),
    label: Optional[str] = LabelOpt,
    hidden: Optional[str] = typer.Option(None, "--hidden"),
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    lr: Optional[float] = typer.Option(None, "--lr"),
    batch_size: Optional[int] = typer.Option(None, "--batch-size"),
    fmt: Optional[str] = FormatOpt,
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    config: Optional[Path] = ConfigOpt,
    stdout: Optional[bool] = StdoutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """Retrain on the base and on each augmented variant; compare on the holdout."""
    opts = resolve(
        dict(locals()),
        {
            "base": None,
            "variants": "",
            "holdout": None,
            "label": "label",
            "hidden": ",".join(str(h) for h in DEFAULT_HIDDEN),
            "epochs": 200,
            "lr": 0.1,
            "batch_size": 16,
            "fmt": "json",
        },
    )
    require(opts, "base", "holdout")
    base_cb = load_tabular_csv(Path(opts.base), opts.label)
    held = align_class_labels(load_tabular_csv(Path(opts.holdout), opts.label), base_cb.schema.class_labels)
    names = [v.strip() for v in str(opts.variants).split(",") if v.strip()]
    variant_cbs = [_variant(base_cb, Path(name), opts.label) for name in names]

    train_config = TrainConfig(
        epochs=opts.epochs, learning_rate=opts.lr, batch_size=opts.batch_size, seed=opts.seed
    )
    table = retrain_eval(
        base_cb, variant_cbs, held, train_config, hidden=parse_ints(opts.hidden), threads=opts.threads
    )
    rows = [row.model_dump() for row in table.rows]
    _write("augmentation_comparison", {"comparison": table}, rows, opts, "augment-report")
