import logging
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from src.cli.common import case_payload, class_name, finish, load_model_and_data, pick_query, resolve_class
from src.cli.options import (
    ConfigOpt,
    DataOpt,
    LabelOpt,
    ModelOpt,
    OutOpt,
    QueryOpt,
    SeedOpt,
    StdoutOpt,
    TargetOpt,
    TauOpt,
    ThreadsOpt,
    require,
    resolve,
)
from src.config import DEFAULT_ALPHA, DEFAULT_TAU, MAX_ATTEMPTS
from src.data.encoding import encode_case
from src.data.loaders import load_timeseries_tsv
from src.errors import DataError
from src.explainers.casebased import generate_cf, mine_explanation_cases
from src.explainers.factual import explain_factual, explain_factual_regression
from src.explainers.piece import fit_hurdle, generate_sf_cf
from src.explainers.timeseries import default_window, native_guide_cf, occlusion_importance
from src.explainers.wachter import wachter_cf
from src.models.mlp import forward, predict
from src.models.persistence import load_model
from src.reports.metrics import evaluate_explanation

logger = logging.getLogger(__name__)

app = typer.Typer(help="Explain a single prediction.", no_args_is_help=True)

COMMON = {"model": None, "data": None, "label": "label", "query_index": None}


@app.command("factual")
def factual(
    model: Optional[Path] = ModelOpt,
    data: Optional[Path] = DataOpt,
    label: Optional[str] = LabelOpt,
    query_index: Optional[int] = QueryOpt,
    k: Optional[int] = typer.Option(None, "--k", help="Number of neighbors."),
    exclude_self: Optional[bool] = typer.Option(
        None, "--exclude-self/--include-self", help="Skip the stored copy of the query."
    ),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    config: Optional[Path] = ConfigOpt,
    stdout: Optional[bool] = StdoutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """Nearest same-predicted-class cases in contribution space."""
    opts = resolve(dict(locals()), {**COMMON, "k": 3, "exclude_self": None})
    require(opts, "model", "data", "query_index")
    net, casebase = load_model_and_data(opts)
    query = pick_query(casebase, opts.query_index)

    if net.is_classifier:
        exclude = True if opts.exclude_self is None else opts.exclude_self
        neighbors = explain_factual(net, casebase, query, opts.k, exclude_self=exclude)
        predicted = int(predict(net, encode_case(net.encoder, query)))
        payload = {
            "query": case_payload(query, casebase, predicted=class_name(net, predicted)),
            "feature_names": casebase.schema.names,
            "neighbors": [
                case_payload(
                    n.case,
                    casebase,
                    distance=n.distance,
                    contributions=n.contributions,
                    attribution=n.attribution,
                )
                for n in neighbors
            ],
        }
    else:
        exclude = False if opts.exclude_self is None else opts.exclude_self
        neighbors = explain_factual_regression(net, casebase, query, opts.k, exclude_self=exclude)
        prediction = float(predict(net, encode_case(net.encoder, query)))
        payload = {
            "query": case_payload(query, casebase, predicted=prediction),
            "feature_names": casebase.schema.names,
            "neighbors": [
                case_payload(n.case, casebase, distance=n.distance) for n in neighbors
            ],
        }
    finish("factual", payload, opts, "factual-report.json", model=net)


@app.command("cf")
def counterfactual(
    method: Optional[str] = typer.Option(None, "--method", help="casebased or wachter."),
    model: Optional[Path] = ModelOpt,
    data: Optional[Path] = DataOpt,
    label: Optional[str] = LabelOpt,
    query_index: Optional[int] = QueryOpt,
    tau: Optional[float] = TauOpt,
    target_class: Optional[str] = TargetOpt,
    max_attempts: Optional[int] = typer.Option(None, "--max-attempts"),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    config: Optional[Path] = ConfigOpt,
    stdout: Optional[bool] = StdoutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """Counterfactual by explanation-case adaptation, or by the gradient baseline."""
    opts = resolve(
        dict(locals()),
        {**COMMON, "method": "casebased", "tau": DEFAULT_TAU, "target_class": None, "max_attempts": MAX_ATTEMPTS},
    )
    require(opts, "model", "data", "query_index")
    if opts.method not in ("casebased", "wachter"):
        raise typer.BadParameter(f"unknown method '{opts.method}'", param_hint="--method")
    net, casebase = load_model_and_data(opts)
    query = pick_query(casebase, opts.query_index)
    target = resolve_class(net.class_labels, opts.target_class)
    xcs = mine_explanation_cases(casebase, opts.tau)

    if opts.method == "casebased":
        cf = generate_cf(query, net, casebase, xcs, opts.max_attempts, opts.tau, target_class=target)
    else:
        if target is None:
            probs = forward(net, encode_case(net.encoder, query)).probs.copy()
            probs[int(np.argmax(probs))] = -np.inf
            target = int(np.argmax(probs))
        cf = wachter_cf(query, net, target, scaler=casebase.scaler, tau=opts.tau)

    metrics = evaluate_explanation(query, cf.instance, net, casebase, xcs, opts.tau)
    payload = {
        "method": opts.method,
        "query": case_payload(query, casebase, predicted=class_name(net, cf.query_class)),
        "feature_names": casebase.schema.names,
        "counterfactual": cf,
        "instance_class": class_name(net, cf.target_class),
        "before": list(query.features),
        "after": list(cf.instance),
        "metrics": metrics,
        "explanation_cases": len(xcs),
    }
    finish("counterfactual", payload, opts, "cf-report.json", model=net)


@app.command("sf")
def semifactual(
    model: Optional[Path] = ModelOpt,
    data: Optional[Path] = DataOpt,
    label: Optional[str] = LabelOpt,
    query_index: Optional[int] = QueryOpt,
    target_class: Optional[str] = TargetOpt,
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Exceptionality threshold."),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    config: Optional[Path] = ConfigOpt,
    stdout: Optional[bool] = StdoutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """Semi-factual and counterfactual by perturbing exceptional latent features."""
    opts = resolve(dict(locals()), {**COMMON, "target_class": None, "alpha": DEFAULT_ALPHA})
    require(opts, "model", "data", "query_index", "target_class")
    net, casebase = load_model_and_data(opts)
    query = pick_query(casebase, opts.query_index)
    target = resolve_class(net.class_labels, opts.target_class)
    stats = fit_hurdle(net, casebase)
    result = generate_sf_cf(net, stats, casebase, query, target, opts.alpha)

    payload = {
        "query": case_payload(query, casebase, predicted=class_name(net, result.query_class)),
        "target_class": class_name(net, target),
        "query_latent": result.query_latent,
        "exceptional_features": result.exceptional,
        "steps": result.steps,
        "steps_to_flip": result.steps_to_flip,
        "degenerate_semifactual": result.degenerate,
        # realized cases are retrieved training instances, not synthesized ones
        "realization": "nearest training case in latent space",
        "semifactual": {
            "latent": result.semifactual_latent,
            "case": case_payload(result.semifactual_case, casebase),
        },
        "counterfactual": None
        if result.counterfactual_case is None
        else {
            "latent": result.counterfactual_latent,
            "case": case_payload(result.counterfactual_case, casebase),
        },
    }
    finish("semifactual", payload, opts, "sf-report.json", model=net)


@app.command("ts-cf")
def timeseries_cf(
    model: Optional[Path] = ModelOpt,
    data: Optional[Path] = DataOpt,
    query_index: Optional[int] = QueryOpt,
    occlusion_window: Optional[int] = typer.Option(None, "--occlusion-window"),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    config: Optional[Path] = ConfigOpt,
    stdout: Optional[bool] = StdoutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """Native Guide counterfactual for a series in a TSV dataset."""
    opts = resolve(
        dict(locals()),
        {"model": None, "data": None, "query_index": None, "occlusion_window": None},
    )
    require(opts, "model", "data", "query_index")
    net = load_model(Path(opts.model))
    dataset = load_timeseries_tsv(Path(opts.data))
    if not 0 <= opts.query_index < len(dataset):
        raise DataError(f"query index {opts.query_index} is out of range for {len(dataset)} series")
    instance = dataset[opts.query_index]
    window_w = opts.occlusion_window or default_window(dataset.length)
    importance = occlusion_importance(net, instance, window_w, dataset.mean_signal())
    result = native_guide_cf(instance, net, dataset, importance)

    payload = {
        "query_id": instance.id,
        "query": result.query,
        "counterfactual": result.counterfactual,
        "nun_id": result.nun_id,
        "nun": result.nun,
        "window": {"start": result.window[0], "end": result.window[1]},
        "query_class": class_name(net, result.query_class),
        "nun_class": class_name(net, result.nun_class),
        "valid": result.valid,
        "distance": result.distance,
        "nun_distance": result.nun_distance,
        "importance": {"method": importance.method, "window": window_w, "values": importance.values},
        "growth": [{"start": a, "end": b, "predicted": c} for a, b, c in result.growth],
    }
    finish("timeseries_counterfactual", payload, opts, "ts-cf-report.json", model=net)
