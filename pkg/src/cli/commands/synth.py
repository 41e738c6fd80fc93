from pathlib import Path
from typing import Optional

import numpy as np
import typer

from src.cli.common import announce
from src.cli.options import ConfigOpt, OutOpt, SeedOpt, StdoutOpt, ThreadsOpt, resolve
from src.data.loaders import save_tabular_csv, save_timeseries_tsv
from src.data.synth import synth_blobs, synth_imbalanced, synth_series

app = typer.Typer(help="Write seeded synthetic datasets.", no_args_is_help=True)


@app.command("blobs")
def blobs(
    n_per_class: Optional[int] = typer.Option(None, "--n-per-class"),
    dims: Optional[int] = typer.Option(None, "--dims"),
    classes: Optional[int] = typer.Option(None, "--classes"),
    separation: Optional[float] = typer.Option(None, "--separation", help="Offset between class means on every axis."),
    sigma: Optional[float] = typer.Option(None, "--sigma"),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    config: Optional[Path] = ConfigOpt,
    stdout: Optional[bool] = StdoutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """Gaussian blob per class; class c is centered at c * separation on every axis."""
    opts = resolve(
        dict(locals()),
        {"n_per_class": 50, "dims": 2, "classes": 2, "separation": 3.0, "sigma": 1.0},
    )
    means = np.outer(np.arange(opts.classes), np.full(opts.dims, opts.separation))
    casebase = synth_blobs(opts.n_per_class, opts.dims, means, opts.sigma, opts.seed)
    announce(save_tabular_csv(casebase, Path(opts.out or "blobs.csv")))


@app.command("imbalanced")
def imbalanced(
    majority: Optional[int] = typer.Option(None, "--majority"),
    minority: Optional[int] = typer.Option(None, "--minority"),
    dims: Optional[int] = typer.Option(None, "--dims"),
    separation: Optional[float] = typer.Option(None, "--separation"),
    sigma: Optional[float] = typer.Option(None, "--sigma"),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    config: Optional[Path] = ConfigOpt,
    stdout: Optional[bool] = StdoutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """Overlapping "normal" and "outlier" regimes."""
    opts = resolve(
        dict(locals()),
        {"majority": 95, "minority": 5, "dims": 2, "separation": 1.5, "sigma": 1.0},
    )
    casebase = synth_imbalanced(
        opts.majority, opts.minority, opts.seed, dims=opts.dims, separation=opts.separation, sigma=opts.sigma
    )
    announce(save_tabular_csv(casebase, Path(opts.out or "imbalanced.csv")))


@app.command("series")
def series(
    n_per_class: Optional[int] = typer.Option(None, "--n-per-class"),
    length: Optional[int] = typer.Option(None, "--length"),
    noise: Optional[float] = typer.Option(None, "--noise"),
    bump: Optional[float] = typer.Option(None, "--bump", help="Height of the class-1 bump."),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    config: Optional[Path] = ConfigOpt,
    stdout: Optional[bool] = StdoutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """Noise series, half of them carrying a bump."""
    opts = resolve(dict(locals()), {"n_per_class": 100, "length": 64, "noise": 0.3, "bump": 2.0})
    dataset = synth_series(opts.n_per_class, opts.length, opts.seed, noise=opts.noise, bump_height=opts.bump)
    announce(save_timeseries_tsv(dataset, Path(opts.out or "series.tsv")))
