import logging
from pathlib import Path
from typing import Optional

import typer

from src.augmentation.counterfactual import cf_augment
from src.augmentation.harness import DEFAULT_HIDDEN, minority_gap
from src.augmentation.smote import smote
from src.cli.common import announce, resolve_class
from src.cli.options import (
    ConfigOpt,
    DataOpt,
    LabelOpt,
    ModelOpt,
    OutOpt,
    SeedOpt,
    StdoutOpt,
    TargetOpt,
    TauOpt,
    ThreadsOpt,
    require,
    resolve,
)
from src.config import DEFAULT_TAU, SMOTE_K
from src.data.casebase import CaseBase, align_class_labels
from src.data.loaders import load_tabular_csv, save_tabular_csv
from src.errors import AugmentationError
from src.models.mlp import TrainConfig, build_model, train_sgd
from src.models.persistence import load_model

logger = logging.getLogger(__name__)

AUGMENT_DEFAULTS = {
    "method": "cf",
    "data": None,
    "label": "label",
    "model": None,
    "target_class": None,
    "count": None,
    "k": SMOTE_K,
    "tau": DEFAULT_TAU,
}


def augment(
    method: Optional[str] = typer.Option(None, "--method", help="cf or smote."),
    data: Optional[Path] = DataOpt,
    label: Optional[str] = LabelOpt,
    model: Optional[Path] = ModelOpt,
    target_class: Optional[str] = TargetOpt,
    count: Optional[int] = typer.Option(None, "--count", help="Synthetic cases wanted (default: balance)."),
    k: Optional[int] = typer.Option(None, "--k", help="SMOTE neighbors."),
    tau: Optional[float] = TauOpt,
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    config: Optional[Path] = ConfigOpt,
    stdout: Optional[bool] = StdoutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """Write synthetic target-class cases in the input CSV dialect."""
    opts = resolve(dict(locals()), AUGMENT_DEFAULTS)
    require(opts, "data", "target_class")
    if opts.method not in ("cf", "smote"):
        raise typer.BadParameter(f"unknown method '{opts.method}'", param_hint="--method")
    casebase = load_tabular_csv(Path(opts.data), opts.label)
    target = resolve_class(casebase.schema.class_labels, opts.target_class)
    n_needed = opts.count if opts.count is not None else minority_gap(casebase, target)
    if n_needed < 1:
        raise AugmentationError(f"class {opts.target_class} needs no synthetic cases")

    if opts.method == "smote":
        synthetic = smote(casebase, target, opts.k, n_needed, opts.seed)
    else:
        if opts.model is not None:
            net = load_model(Path(opts.model))
            casebase = align_class_labels(casebase, net.class_labels)
            target = resolve_class(casebase.schema.class_labels, opts.target_class)
        else:
            logger.info("No --model given; training one on --data")
            net, _ = train_sgd(
                build_model(casebase, list(DEFAULT_HIDDEN), seed=opts.seed),
                casebase,
                TrainConfig(seed=opts.seed),
            )
        synthetic = cf_augment(casebase, net, target, n_needed, opts.tau)

    path = save_tabular_csv(CaseBase.build(casebase.schema, synthetic), Path(opts.out or "synth.csv"))
    announce(path)
