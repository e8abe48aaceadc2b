"""Serialization: populations, draws, weights, tensors, reports, configs.

All floating point output uses 17 significant digits, which round-trips
float64 exactly and makes repeated runs byte-comparable.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .designs import SampleDraw
from .enumeration import JointInclusionTensor
from .experiment import ExperimentConfig, ScenarioReport, ScenarioSpec
from .populations import ROLE_LABELS, Population, PopulationConfig
from .weighting import WeightVector


def fmt(value) -> str:
    """17-significant-digit decimal form; exact float64 round trip."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def save_population(pop: Population, csv_path, sidecar_path=None) -> None:
    """Population frame to CSV plus a JSON sidecar with config and median."""
    rows = (
        (
            int(pop.psu_id[i]),
            int(pop.hh_id[i]),
            ROLE_LABELS[pop.role[i] - 1],
            fmt(pop.x1[i]),
            fmt(pop.x2[i]),
            fmt(pop.size[i]),
            fmt(pop.mu[i]),
            fmt(pop.y[i]),
        )
        for i in range(len(pop))
    )
    _write_csv(csv_path, ("psu_id", "hh_id", "role", "x1", "x2", "size", "mu", "y"), rows)
    if sidecar_path is not None:
        payload = {"config": asdict(pop.config), "median_x2_p1": pop.median_x2_p1}
        Path(sidecar_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_population(csv_path, sidecar_path) -> Population:
    sidecar = json.loads(Path(sidecar_path).read_text())
    config = PopulationConfig(**sidecar["config"])
    cols: dict[str, list] = {k: [] for k in ("psu_id", "hh_id", "role", "x1", "x2", "size", "mu", "y")}
    with open(csv_path, newline="") as handle:
        for row in csv.DictReader(handle):
            for key in cols:
                cols[key].append(row[key])
    role = np.array([ROLE_LABELS.index(r) + 1 for r in cols["role"]], dtype=np.int8)
    return Population(
        config=config,
        psu_id=np.asarray(cols["psu_id"], dtype=int),
        hh_id=np.asarray(cols["hh_id"], dtype=int),
        role=role,
        x1=np.asarray(cols["x1"], dtype=float),
        x2=np.asarray(cols["x2"], dtype=float),
        size=np.asarray(cols["size"], dtype=float),
        mu=np.asarray(cols["mu"], dtype=float),
        y=np.asarray(cols["y"], dtype=float),
        median_x2_p1=float(sidecar["median_x2_p1"]),
    )


def save_sample(draw: SampleDraw, path) -> None:
    header = (
        "person",
        "psu_id",
        "hh_id",
        "role",
        "pi_psu",
        "pi_hh_given_psu",
        "pi_person_given_hh",
        "pi_pair_given_hh",
        "partner",
    )
    rows = (
        (
            int(draw.person_index[i]),
            int(draw.psu_id[i]),
            int(draw.hh_id[i]),
            ROLE_LABELS[draw.role[i] - 1],
            fmt(draw.pi_psu[i]),
            fmt(draw.pi_hh_given_psu[i]),
            fmt(draw.pi_person_given_hh[i]),
            fmt(draw.pi_pair_given_hh[i]),
            int(draw.partner_index[i]),
        )
        for i in range(len(draw))
    )
    _write_csv(path, header, rows)


def save_weights(weights: WeightVector, draw: SampleDraw, path) -> None:
    rows = (
        (
            int(draw.person_index[i]),
            weights.scheme,
            fmt(weights.raw[i]),
            fmt(weights.normalized[i]) if weights.normalized is not None else "",
            int(bool(weights.mask[i])),
        )
        for i in range(len(draw))
    )
    _write_csv(path, ("person", "scheme", "raw", "normalized", "in_domain"), rows)


def tensor_to_json(tensor: JointInclusionTensor, path=None) -> str:
    payload = {
        "description": tensor.description,
        "n_units": tensor.n_units,
        "method": tensor.method,
        "n_reps": tensor.n_reps,
        "expected_sample_size": tensor.expected_sample_size,
        "orders": {
            str(order): {",".join(map(str, key)): prob for key, prob in sorted(entries.items())}
            for order, entries in tensor.orders.items()
        },
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def tensor_from_json(source) -> JointInclusionTensor:
    if isinstance(source, dict):
        payload = source
    else:
        payload = json.loads(Path(source).read_text())
    orders = {
        int(order): {tuple(map(int, key.split(","))): float(p) for key, p in entries.items()}
        for order, entries in payload["orders"].items()
    }
    return JointInclusionTensor(
        description=payload["description"],
        n_units=payload["n_units"],
        orders=orders,
        method=payload["method"],
        n_reps=payload.get("n_reps"),
        expected_sample_size=payload.get("expected_sample_size"),
    )


def save_report(report: ScenarioReport, path) -> None:
    """Cell-by-grid-point table: scheme, K, grid_x, mean_curve, bias, mse, n_failures."""
    rows = []
    for scheme, n_psu in report.cells():
        mean = report.mean_curve(scheme, n_psu)
        bias = report.bias(scheme, n_psu)
        mse = report.mse(scheme, n_psu)
        fails = report.n_failures(scheme, n_psu)
        for g, x in enumerate(report.grid):
            rows.append((scheme, n_psu, fmt(x), fmt(mean[g]), fmt(bias[g]), fmt(mse[g]), fails))
    _write_csv(path, ("scheme", "K", "grid_x", "mean_curve", "bias", "mse", "n_failures"), rows)


def save_reference(report: ScenarioReport, path) -> None:
    rows = ((fmt(x), fmt(v)) for x, v in zip(report.grid, report.reference))
    _write_csv(path, ("grid_x", "reference"), rows)


def save_replication_curves(report: ScenarioReport, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for (scheme, n_psu), curves in report.curves.items():
        rows = []
        for row, rep in enumerate(report.rep_indices):
            for g, x in enumerate(report.grid):
                rows.append((int(rep), fmt(x), fmt(curves[row, g])))
        _write_csv(directory / f"curves_{scheme}_K{n_psu}.csv", ("rep", "grid_x", "curve"), rows)


def load_config(path) -> dict:
    """TOML or JSON config file to a plain dict."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return json.loads(path.read_text())
    with open(path, "rb") as handle:
        return tomllib.load(handle)


def experiment_config_from_dict(raw: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from the documented config schema.

    Sections: ``population``, ``scenario``, ``design``, ``model``, ``mcmc``,
    ``experiment``.  Every field is optional and falls back to the dataclass
    default.
    """
    population = PopulationConfig(**raw.get("population", {}))
    scenario = ScenarioSpec(**raw.get("scenario", {}))
    design = raw.get("design", {})
    model = raw.get("model", {})
    mcmc = raw.get("mcmc", {})
    experiment = raw.get("experiment", {})
    ladder = design.get("n_psu_selected", (40,))
    if isinstance(ladder, int):
        ladder = (ladder,)
    return ExperimentConfig(
        population=population,
        scenario=scenario,
        n_psu_selected=tuple(int(k) for k in ladder),
        n_hh_per_psu=int(design.get("n_hh_per_psu", 5)),
        schemes=tuple(experiment.get("schemes", ("equal", "marginal", "hh_pairwise"))),
        replications=int(experiment.get("replications", 50)),
        rep_offset=int(experiment.get("rep_offset", 0)),
        quantile=float(model.get("quantile", 0.5)),
        n_knots=int(model.get("n_knots", 5)),
        degree=int(model.get("degree", 2)),
        chains=int(mcmc.get("chains", 2)),
        warmup=int(mcmc.get("warmup", 500)),
        draws=int(mcmc.get("draws", 1000)),
        target_accept=float(mcmc.get("target_accept", 0.8)),
        algorithm=str(mcmc.get("algorithm", "hmc")),
        grid_points=int(experiment.get("grid_points", 101)),
        seed=int(experiment.get("seed", 0)),
        fresh_population_per_rep=bool(experiment.get("fresh_population_per_rep", False)),
        workers=int(experiment.get("workers", 1)),
    )
