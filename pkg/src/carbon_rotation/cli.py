"""Command-line entry point: ``carbon-rotation {solve,simulate,sweep,curves}``."""
from __future__ import annotations

import argparse
import copy
import dataclasses
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import output
from .carbon import remaining_stock_fraction
from .config import ConfigError, ScenarioConfig, bundled_preset, load_config
from .growth import tabulate_curves
from .optimize import ConvergenceError, solve_optimal_rotation
from .simulation import simulate
from .sweep import extract_frontier, iso_rotation_tradeoffs, rotation_matrix, run_sweep

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2
OUTPUT_DIR_ENV = "CARBON_ROTATION_OUTPUT_DIR"
SUBCOMMANDS = {"solve": "solve", "simulate": "simulate", "sweep": "sweep", "curves": "tabulate-curves"}


def _header(cfg: ScenarioConfig) -> dict:
    return {
        "config_hash": cfg.config_hash,
        "rng_seed": cfg.simulation.rng_seed,
        "config": cfg.resolved,
    }


def _solve(cfg: ScenarioConfig, out: Path) -> list[Path]:
    problem = cfg.problem()
    sol = solve_optimal_rotation(problem, cfg.solver)
    body = {
        **_header(cfg),
        "species": cfg.run_species,
        "damage_type": cfg.damage_type,
        "p_c": cfg.econ.p_c,
        "damage_rate": cfg.damage_rate,
        **sol.to_dict(),
    }
    return [output.write_json(out / "solution.json", body)]


def _simulate(cfg: ScenarioConfig, out: Path) -> list[Path]:
    problem = cfg.problem()
    if cfg.rotation is None:
        sol = solve_optimal_rotation(problem, cfg.solver)
        T, regime = sol.T_star, sol.regime
    else:
        T, regime = cfg.rotation, "fixed"
    summary = simulate(problem, T, cfg.simulation)
    row = {"config_hash": cfg.config_hash, "species": cfg.run_species, "damage_type": cfg.damage_type,
           "p_c": cfg.econ.p_c, "damage_rate": cfg.damage_rate, "regime": regime}
    flat = {k: v for k, v in summary.to_dict().items() if k not in ("ci_halfwidths", "warnings")}
    row.update(flat)
    row.update({f"ci_{k}": v for k, v in summary.ci_halfwidths.items()})
    row["warnings"] = "; ".join(summary.warnings)
    cols = list(row)
    return [
        output.write_json(out / "simulation.json", {**_header(cfg), "regime": regime, **summary.to_dict()}),
        output.write_csv(out / "simulation.csv", cols, [row]),
    ]


CELL_COLUMNS = ["species", "damage_type", "p_c", "damage_rate", "regime", "T_star", "lev", "foc_residual",
                "avg_harvest", "avg_carbon_stock", "mean_npv", "rel_std_npv", "error"]


def _sweep(cfg: ScenarioConfig, out: Path, workers: int) -> list[Path]:
    grid = cfg.sweep
    sim = cfg.simulation if cfg.sweep_monte_carlo else None
    cells = run_sweep(grid, sim, factory=_Factory(cfg), workers=workers, settings=cfg.solver)
    dicts = [c.to_dict() for c in cells]
    paths = [
        output.write_csv(out / "sweep_cells.csv", CELL_COLUMNS, dicts),
        output.write_json(out / "sweep_cells.json", {**_header(cfg), "cells": dicts}),
    ]
    frontier_rows, matrices, tradeoffs = [], {}, []
    for sp in grid.species:
        for curve in extract_frontier(cells, sp, grid.damage_type):
            for p in curve.points:
                frontier_rows.append({"species": sp, "damage_type": grid.damage_type, "damage_rate": curve.damage_rate,
                                      "p_c": p.p_c, "regime": p.regime, "avg_carbon_stock": p.avg_carbon_stock,
                                      "avg_harvest": p.avg_harvest, "mixed_regime": curve.mixed_regime})
        lam, p_c, mat = rotation_matrix(cells, sp, grid.damage_type)
        matrices[sp] = {"damage_rate": lam.tolist(), "p_c": p_c.tolist(), "T_star": mat.tolist()}
        rows = [{"damage_rate": float(l), **{output.fmt_float(x): mat[i, j] for j, x in enumerate(p_c)}}
                for i, l in enumerate(lam)]
        paths.append(output.write_csv(out / f"rotation_matrix_{sp}.csv",
                                      ["damage_rate"] + [output.fmt_float(x) for x in p_c], rows))
        tradeoffs += [{"species": sp, **dataclasses.asdict(t)} for t in iso_rotation_tradeoffs(cells, sp, grid.damage_type)]
    fcols = ["species", "damage_type", "damage_rate", "p_c", "regime", "avg_carbon_stock", "avg_harvest", "mixed_regime"]
    paths.append(output.write_csv(out / "frontier.csv", fcols, frontier_rows))
    paths.append(output.write_json(out / "frontier.json", {**_header(cfg), "frontier": frontier_rows,
                                                           "rotation_matrix": matrices, "tradeoffs": tradeoffs}))
    return paths


class _Factory:
    """Picklable problem factory for worker processes."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg

    def __call__(self, species, damage_type, p_c, lam):
        return self.cfg.problem(species, p_c=p_c, damage_rate=lam, damage_type=damage_type)


def _curves(cfg: ScenarioConfig, out: Path) -> list[Path]:
    cu = cfg.curves
    ages = np.arange(0.0, cu["max_age"] + 0.5 * cu["step"], cu["step"])
    years = np.arange(0.0, cu["decay_years"] + 0.5 * cu["step"], cu["step"])
    growth_rows, decay_rows = [], []
    for name, sp in cfg.species.items():
        table = tabulate_curves(sp.growth, cfg.price, ages)
        for i in range(ages.size):
            growth_rows.append({"species": name, **{k: v[i] for k, v in table.items()}})
        for label in ("storm", "fire", "harvest"):
            frac = remaining_stock_fraction(sp.carbon.profile(label), years)
            for y, f in zip(years, frac):
                decay_rows.append({"species": name, "event": label, "years_since_event": y, "fraction_remaining": f})
    return [
        output.write_csv(out / "growth_curves.csv",
                         ["species", "age_years", "volume_m3_ha", "increment_m3_ha_yr", "price_eur_m3"], growth_rows),
        output.write_csv(out / "carbon_decay.csv", ["species", "event", "years_since_event", "fraction_remaining"],
                         decay_rows),
    ]


def run(cfg: ScenarioConfig, output_dir, workers: int = 1) -> list[Path]:
    """Execute the configured mode and return the files written."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "solve":
        return _solve(cfg, out)
    if cfg.mode == "simulate":
        if workers > 1:
            cfg = dataclasses.replace(cfg, simulation=dataclasses.replace(cfg.simulation, workers=workers))
        return _simulate(cfg, out)
    if cfg.mode == "sweep":
        return _sweep(cfg, out, workers)
    return _curves(cfg, out)


def with_mode(cfg: ScenarioConfig, mode: str) -> ScenarioConfig:
    """The subcommand decides the mode; the file's ``run.mode`` is only a default."""
    resolved = copy.deepcopy(cfg.resolved)
    resolved["run"]["mode"] = mode
    return dataclasses.replace(cfg, resolved=resolved, mode=mode)


def _error(kind: str, exc: Exception, code: int) -> int:
    body = {"status": "error", "kind": kind, "message": str(exc)}
    for attr in ("field", "line", "column", "bracket"):
        if getattr(exc, attr, None) not in (None, ""):
            body[attr] = getattr(exc, attr)
    print(output.dumps(body))
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carbon-rotation",
                                     description="Optimal forest rotation under carbon pricing and damage risk.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", "-c", required=True,
                       help="scenario YAML file or bundled scenario name (e.g. pine-fire)")
        p.add_argument("--output-dir", "-o", type=Path, default=None,
                       help=f"output directory (default ${OUTPUT_DIR_ENV} or ./output)")
        p.add_argument("--seed", type=int, default=None, help="override run.simulation.rng_seed")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--override", type=Path, default=None,
                       help="JSON file whose 'config' block is merged over the scenario (e.g. a previous output)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        if args.override is not None:
            doc = json.loads(args.override.read_text())
            overrides = doc.get("config", doc)
        if args.seed is not None:
            overrides.setdefault("run", {}).setdefault("simulation", {})["rng_seed"] = args.seed
        path = Path(args.config)
        if not path.exists() and path.suffix == "" and path.parent == Path("."):
            path = bundled_preset(args.config)
        cfg = with_mode(load_config(path, overrides), SUBCOMMANDS[args.command])
        if args.workers < 1:
            raise ConfigError("must be >= 1", "--workers")
    except ConfigError as exc:
        return _error("validation", exc, EXIT_VALIDATION)
    except (OSError, json.JSONDecodeError) as exc:
        return _error("validation", exc, EXIT_VALIDATION)

    out = args.output_dir or Path(os.environ.get(OUTPUT_DIR_ENV, "output"))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            paths = run(cfg, out, args.workers)
    except (ConvergenceError, ArithmeticError, ValueError, RuntimeError) as exc:
        return _error("numerical", exc, EXIT_NUMERICAL)
    print(output.dumps({"status": "ok", "config_hash": cfg.config_hash, "files": [str(p) for p in paths]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
