import logging
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from src.cli.common import announce
from src.cli.options import (
    ConfigOpt,
    DataOpt,
    LabelOpt,
    OutOpt,
    SeedOpt,
    StdoutOpt,
    ThreadsOpt,
    parse_ints,
    require,
    resolve,
)
from src.data.loaders import load_tabular_csv, load_timeseries_tsv
from src.data.encoding import encode_rows
from src.models.mlp import TrainConfig, build_model, fit_arrays, init_model, predict_batch, train_sgd
from src.models.persistence import save_model

logger = logging.getLogger(__name__)

TRAIN_DEFAULTS = {
    "data": None,
    "label": "label",
    "task": "classification",
    "series": False,
    "hidden": "16",
    "epochs": 200,
    "lr": 0.1,
    "batch_size": 16,
    "l2": 0.0,
}


def train(
    data: Optional[Path] = DataOpt,
    label: Optional[str] = LabelOpt,
    task: Optional[str] = typer.Option(None, "--task", help="classification or regression."),
    series: Optional[bool] = typer.Option(None, "--series/--tabular", help="--data is a TSV of series."),
    hidden: Optional[str] = typer.Option(None, "--hidden", help="Hidden widths, e.g. 16,8."),
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    lr: Optional[float] = typer.Option(None, "--lr"),
    batch_size: Optional[int] = typer.Option(None, "--batch-size"),
    l2: Optional[float] = typer.Option(None, "--l2"),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    config: Optional[Path] = ConfigOpt,
    stdout: Optional[bool] = StdoutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """Train the network half of the twin and write it as a JSON model file."""
    opts = resolve(dict(locals()), TRAIN_DEFAULTS)
    require(opts, "data")
    train_config = TrainConfig(
        epochs=opts.epochs,
        learning_rate=opts.lr,
        batch_size=opts.batch_size,
        seed=opts.seed,
        l2=opts.l2,
    )
    hidden_sizes = parse_ints(opts.hidden)

    if opts.series:
        dataset = load_timeseries_tsv(Path(opts.data))
        model = init_model(
            [dataset.length, *hidden_sizes, len(dataset.class_labels)],
            seed=opts.seed,
            class_labels=dataset.class_labels,
        )
        trained, _ = fit_arrays(model, dataset.values, dataset.labels, train_config)
        X, y = dataset.values, dataset.labels
    else:
        casebase = load_tabular_csv(Path(opts.data), opts.label, task=opts.task)
        model = build_model(casebase, hidden_sizes, seed=opts.seed)
        trained, _ = train_sgd(model, casebase, train_config)
        X = encode_rows(trained.encoder, [c.features for c in casebase.cases])
        y = casebase.labels

    if trained.is_classifier:
        accuracy = float(np.mean(predict_batch(trained, X) == y))
        logger.info(f"Training accuracy {accuracy:.4f}")

    path = save_model(trained, Path(opts.out or "model.json"))
    announce(path)
