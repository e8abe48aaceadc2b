"""Command line interface.

Subcommands read a TOML/JSON config, write CSV/JSON artifacts into an output
directory, and are deterministic for a fixed config and seed.  Failures exit
nonzero after printing a machine-readable error record to stderr.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import io
from .conditions import check_conditions
from .designs import DesignConfig, draw_sample
from .enumeration import SrsworSpec, StagedSpec, enumerate_design
from .estimator import QuantileSplineRegressor
from .experiment import run_experiment
from .populations import PopulationConfig, generate_population
from .weighting import SCHEMES, compute_weights


def _fail(code: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    raise SystemExit(1)


def _out_path(directory, name, force: bool) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    if path.exists() and not force:
        _fail("output-exists", f"{path} exists; pass --force to overwrite")
    return path


def _population_from_config(config_path, seed_override):
    raw = io.load_config(config_path)
    cfg = PopulationConfig(**raw.get("population", {}))
    if seed_override is not None:
        cfg = replace(cfg, seed=seed_override)
    return generate_population(cfg), raw


@click.group()
def main():
    """Simulation and estimation toolkit for pairwise survey weighting."""


@main.command("gen-pop")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="override the population seed")
@click.option("--force", is_flag=True)
def gen_pop(config_path, out_dir, seed, force):
    """Generate the synthetic population and write population.csv/.json."""
    try:
        pop, _ = _population_from_config(config_path, seed)
        csv_path = _out_path(out_dir, "population.csv", force)
        io.save_population(pop, csv_path, Path(out_dir) / "population.json")
        click.echo(f"wrote {csv_path} ({len(pop)} persons)")
    except SystemExit:
        raise
    except Exception as exc:
        _fail("gen-pop", str(exc))


@main.command("draw-sample")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="override the design seed")
@click.option("--force", is_flag=True)
def draw_sample_cmd(config_path, out_dir, seed, force):
    """Draw one three-stage sample and write sample.csv."""
    try:
        pop, raw = _population_from_config(config_path, None)
        design_raw = dict(raw.get("design", {}))
        ladder = design_raw.pop("n_psu_selected", 10)
        if isinstance(ladder, (list, tuple)):
            ladder = ladder[0]
        design_raw.pop("seed", None)
        design = DesignConfig(
            n_psu_selected=int(ladder),
            seed=seed if seed is not None else int(raw.get("design", {}).get("seed", 0)),
            **design_raw,
        )
        draw = draw_sample(pop, design)
        path = _out_path(out_dir, "sample.csv", force)
        io.save_sample(draw, path)
        click.echo(f"wrote {path} ({len(draw)} persons)")
    except SystemExit:
        raise
    except Exception as exc:
        _fail("draw-sample", str(exc))


@main.command("weights")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--scheme", type=click.Choice(SCHEMES), default="marginal")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--force", is_flag=True)
def weights_cmd(config_path, scheme, out_dir, seed, force):
    """Draw a sample and write the requested weight scheme to weights.csv."""
    try:
        pop, raw = _population_from_config(config_path, None)
        design_raw = raw.get("design", {})
        ladder = design_raw.get("n_psu_selected", 10)
        if isinstance(ladder, (list, tuple)):
            ladder = ladder[0]
        design = DesignConfig(
            n_psu_selected=int(ladder),
            n_hh_per_psu=int(design_raw.get("n_hh_per_psu", 5)),
            seed=seed if seed is not None else int(design_raw.get("seed", 0)),
        )
        draw = draw_sample(pop, design)
        wv = compute_weights(scheme, draw)
        path = _out_path(out_dir, "weights.csv", force)
        io.save_weights(wv, draw, path)
        click.echo(f"wrote {path}")
    except SystemExit:
        raise
    except Exception as exc:
        _fail("weights", str(exc))


@main.command("fit")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True),
              help="CSV with columns x, y and optionally weight")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--force", is_flag=True)
def fit_cmd(data_path, config_path, out_dir, seed, force):
    """Fit the weighted quantile spline to a data CSV; write curve.csv."""
    try:
        raw = io.load_config(config_path) if config_path else {}
        model = raw.get("model", {})
        mcmc = raw.get("mcmc", {})
        table = np.genfromtxt(data_path, delimiter=",", names=True)
        x, y = table["x"], table["y"]
        weight = table["weight"] if "weight" in (table.dtype.names or ()) else None
        est = QuantileSplineRegressor(
            quantile=float(model.get("quantile", 0.5)),
            n_knots=int(model.get("n_knots", 5)),
            degree=int(model.get("degree", 2)),
            chains=int(mcmc.get("chains", 2)),
            warmup=int(mcmc.get("warmup", 1000)),
            draws=int(mcmc.get("draws", 1000)),
            algorithm=str(mcmc.get("algorithm", "hmc")),
            random_state=seed if seed is not None else int(mcmc.get("seed", 0)),
        )
        est.fit(x[:, None], y, sample_weight=weight)
        grid = np.linspace(x.min(), x.max(), int(model.get("grid_points", 101)))
        band = est.predict_interval(grid[:, None])
        path = _out_path(out_dir, "curve.csv", force)
        io._write_csv(
            path,
            ("x", "mean", "lo95", "hi95"),
            (
                (io.fmt(band["x"][i]), io.fmt(band["mean"][i]), io.fmt(band["lo"][i]), io.fmt(band["hi"][i]))
                for i in range(len(grid))
            ),
        )
        (Path(out_dir) / "diagnostics.json").write_text(
            json.dumps(est.diagnostics_, indent=2, sort_keys=True, default=float) + "\n"
        )
        click.echo(f"wrote {path}")
    except SystemExit:
        raise
    except Exception as exc:
        _fail("fit", str(exc))


@main.command("check-design")
@click.option("--design", type=click.Choice(["srswor", "staged"]), default="srswor")
@click.option("--N", "n_units", type=int, default=6)
@click.option("--n", "n_draw", type=int, default=2)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="staged designs: config with population and design sections")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--force", is_flag=True)
def check_design(design, n_units, n_draw, config_path, out_dir, force):
    """Enumerate a small design and report the condition constants."""
    try:
        if design == "srswor":
            spec = SrsworSpec(n_units=n_units, n_draw=n_draw)
            groups = None
            n_sample = n_draw
        else:
            if config_path is None:
                _fail("check-design", "staged designs need --config")
            pop, raw = _population_from_config(config_path, None)
            design_raw = raw.get("design", {})
            ladder = design_raw.get("n_psu_selected", 1)
            if isinstance(ladder, (list, tuple)):
                ladder = ladder[0]
            cfg = DesignConfig(
                n_psu_selected=int(ladder),
                n_hh_per_psu=int(design_raw.get("n_hh_per_psu", 1)),
            )
            spec = StagedSpec.from_population(pop, cfg)
            groups = pop.hh_index()
            n_sample = cfg.n_psu_selected * cfg.n_hh_per_psu * 2
        tensor = enumerate_design(spec)
        report = check_conditions(tensor, n_sample, groups=groups)
        path = _out_path(out_dir, "conditions.json", force)
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True, default=float) + "\n")
        click.echo(f"wrote {path} (gamma={report.gamma:g})")
    except SystemExit:
        raise
    except Exception as exc:
        _fail("check-design", str(exc))


@main.command("run-experiment")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="override the experiment seed")
@click.option("--threads", type=int, default=None, help="cap worker processes")
@click.option("--save-curves", is_flag=True, help="also write per-replication curves")
@click.option("--force", is_flag=True)
def run_experiment_cmd(config_path, out_dir, seed, threads, save_curves, force):
    """Run the replicated comparison of weighting schemes; write report.csv."""
    try:
        cfg = io.experiment_config_from_dict(io.load_config(config_path))
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if threads is not None:
            cfg = replace(cfg, workers=threads)
        report = run_experiment(cfg)
        path = _out_path(out_dir, "report.csv", force)
        io.save_report(report, path)
        io.save_reference(report, Path(out_dir) / "reference.csv")
        if save_curves:
            io.save_replication_curves(report, Path(out_dir) / "curves")
        click.echo(f"wrote {path}")
    except SystemExit:
        raise
    except Exception as exc:
        _fail("run-experiment", str(exc))


if __name__ == "__main__":
    main()
