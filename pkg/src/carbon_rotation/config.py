"""Scenario files: YAML schema, defaults, validation and object construction.

A scenario has four required top-level blocks::

    species:    {<name>: {preset: pine, growth: {...}, carbon: {...}}, ...}
    economics:  {p_c, r, regen_cost, salvage_fraction, price: {...}}
    damage:     {type: fire|storm, rate}
    run:        {mode, species, rotation, simulation: {...}, solver: {...},
                 sweep: {...}, curves: {...}}

Unknown keys are rejected so that typos cannot silently fall back to a
default.  Every validation failure names the dotted path of the field.
"""
from __future__ import annotations

import copy
import hashlib
import importlib.resources
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .carbon import Compartments, DecayRates, SpeciesCarbon
from .economics import EconomicEnv, RotationProblem
from .growth import GrowthCurve, PriceSchedule
from .optimize import SolverSettings
from .output import dumps
from .presets import SPECIES, Species
from .simulation import SimulationConfig
from .sweep import SweepGrid

REQUIRED_BLOCKS = ("species", "economics", "damage", "run")
MODES = ("solve", "simulate", "sweep", "tabulate-curves")


class ConfigError(ValueError):
    """Invalid scenario file; ``field`` is the dotted path of the culprit."""

    def __init__(self, message: str, field: str = "", line: int | None = None, column: int | None = None):
        self.field = field
        self.line = line
        self.column = column
        where = field
        if line is not None:
            where = f"line {line}, column {column}"
        super().__init__(f"{where}: {message}" if where else message)


def _species_defaults(sp: Species) -> dict:
    g, c = sp.growth, sp.carbon
    return {
        "growth": {"v1": g.v1, "v2": g.v2, "v3": g.v3, "v4": g.v4, "v5": g.v5},
        "carbon": {
            "alpha": c.alpha,
            "gamma_fire": c.gamma_fire,
            "gamma_storm": c.gamma_storm,
            "beta": c.beta,
            "source": "configured-constant",
            "compartments": {
                "stem": c.compartments.stem,
                "branches": c.compartments.branches,
                "foliage": c.compartments.foliage,
                "roots": c.compartments.roots,
            },
            "decay": {
                "stem": c.decay.stem,
                "branches": c.decay.branches,
                "foliage": c.decay.foliage,
                "long_products": c.decay.long_products,
                "medium_products": c.decay.medium_products,
            },
        },
    }


BLOCK_DEFAULTS = {
    "economics": {
        "p_c": 0.0,
        "r": 0.03,
        "regen_cost": 0.0,
        "salvage_fraction": 0.0,
        "price": {"kind": "age-dependent", "mu": 0.015, "p_f_max": 60.0, "p_const": 60.0},
    },
    "damage": {"type": "fire", "rate": 0.0},
    "run": {
        "mode": "solve",
        "species": None,
        "rotation": None,
        "output_dir": None,
        "simulation": {
            "n_paths": 100_000,
            "horizon": 2000.0,
            "rng_seed": 0,
            "time_step": 1.0,
            "stock_horizon": 10_000.0,
            "chunk_size": 8192,
        },
        "solver": {"t_max": 1000.0, "grid_step": 1.0},
        "sweep": {
            "p_c_values": [5.0 * i for i in range(21)],
            "lambda_values": [round(0.001 * i, 3) for i in range(11)],
            "species": None,
            "damage_type": None,
            "monte_carlo": True,
        },
        "curves": {"max_age": 200.0, "step": 1.0, "decay_years": 300.0},
    },
}

# keys whose value may be null or a list rather than a nested block
_LEAF_KEYS = {"v5", "species", "rotation", "output_dir", "p_c_values", "lambda_values", "damage_type"}


def _merge(defaults: dict, given, path: str) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError(f"expected a mapping, got {type(given).__name__}", path)
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}; allowed: {sorted(defaults)}", path)
    out = {}
    for key, default in defaults.items():
        sub = f"{path}.{key}" if path else key
        if isinstance(default, dict) and key not in _LEAF_KEYS:
            out[key] = _merge(default, given.get(key), sub)
        else:
            out[key] = copy.deepcopy(given.get(key, default))
    return out


def _species_block(name: str, given, path: str) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError("expected a mapping", path)
    given = dict(given)
    preset = given.pop("preset", None)
    if preset is None and name in SPECIES:
        preset = name
    if preset is not None:
        if preset not in SPECIES:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(SPECIES)}", f"{path}.preset")
        defaults = _species_defaults(SPECIES[preset])
    else:
        defaults = _species_defaults(SPECIES["pine"])
        for req in ("growth", "carbon"):
            if req not in given:
                raise ConfigError(f"species without a preset must define '{req}'", path)
        for req in ("v1", "v2", "v3", "v4"):
            if req not in (given["growth"] or {}):
                raise ConfigError("required without a preset", f"{path}.growth.{req}")
        if "alpha" not in (given["carbon"] or {}):
            raise ConfigError("required without a preset", f"{path}.carbon.alpha")
    merged = _merge(defaults, given, path)
    merged["preset"] = preset
    return merged


def resolve(raw) -> dict:
    """Apply defaults and reject unknown keys; returns a plain nested dict."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    missing = [b for b in REQUIRED_BLOCKS if b not in raw]
    if missing:
        raise ConfigError(f"missing required top-level block(s): {', '.join(missing)} "
                          f"(required: {', '.join(REQUIRED_BLOCKS)})")
    unknown = sorted(set(raw) - set(REQUIRED_BLOCKS))
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {unknown}")
    species = raw["species"]
    if not isinstance(species, dict) or not species:
        raise ConfigError("at least one species block is required", "species")
    out = {"species": {str(k): _species_block(str(k), v, f"species.{k}") for k, v in species.items()}}
    for block in ("economics", "damage", "run"):
        out[block] = _merge(BLOCK_DEFAULTS[block], raw[block], block)
    return out


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    value = float(value)
    if math.isnan(value):
        raise ConfigError("must not be NaN", path)
    return value


def _build(path: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), path) from exc


@dataclass(frozen=True)
class ScenarioConfig:
    resolved: dict
    species: dict[str, Species]
    carbon_source: dict[str, str]
    econ: EconomicEnv
    price: PriceSchedule
    damage_type: str
    damage_rate: float
    mode: str
    run_species: str
    rotation: float | None
    simulation: SimulationConfig
    solver: SolverSettings
    sweep: SweepGrid
    sweep_monte_carlo: bool
    curves: dict

    @property
    def config_hash(self) -> str:
        return config_hash(self.resolved)

    def problem(self, species: str | None = None, p_c: float | None = None,
                damage_rate: float | None = None, damage_type: str | None = None) -> RotationProblem:
        name = species or self.run_species
        sp = self.species[name]
        dtype = damage_type or self.damage_type
        econ = self.econ if p_c is None else EconomicEnv(p_c, self.econ.r, self.econ.regen_cost, self.econ.salvage_fraction)
        return RotationProblem(
            growth=sp.growth,
            price=self.price,
            carbon=sp.carbon.params(dtype, self.carbon_source[name], self.econ.r),
            econ=econ,
            damage_rate=self.damage_rate if damage_rate is None else damage_rate,
            damage_profile=sp.carbon.profile(dtype),
            harvest_profile=sp.carbon.profile("harvest"),
        )


def config_hash(resolved: dict) -> str:
    body = {k: v for k, v in resolved.items() if k != "run"}
    body["run"] = {k: v for k, v in resolved["run"].items() if k != "output_dir"}
    # hash the serialized form so that 60 and 60.0 (or a re-read JSON echo) agree
    text = dumps(body, indent=0)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _build_species(name: str, block: dict, path: str) -> tuple[Species, str]:
    g = block["growth"]
    growth = _build(f"{path}.growth", GrowthCurve, name=name,
                    v5=None if g["v5"] is None else _num(g["v5"], f"{path}.growth.v5"),
                    **{k: _num(g[k], f"{path}.growth.{k}") for k in ("v1", "v2", "v3", "v4")})
    c = block["carbon"]
    comp = _build(f"{path}.carbon.compartments", Compartments,
                  **{k: _num(v, f"{path}.carbon.compartments.{k}") for k, v in c["compartments"].items()})
    decay = _build(f"{path}.carbon.decay", DecayRates,
                   **{k: _num(v, f"{path}.carbon.decay.{k}") for k, v in c["decay"].items()})
    for k, v in c["decay"].items():
        if not v > 0:
            raise ConfigError("decay rates must be > 0", f"{path}.carbon.decay.{k}")
    carbon = SpeciesCarbon(
        alpha=_num(c["alpha"], f"{path}.carbon.alpha"),
        gamma_fire=_num(c["gamma_fire"], f"{path}.carbon.gamma_fire"),
        gamma_storm=_num(c["gamma_storm"], f"{path}.carbon.gamma_storm"),
        beta=_num(c["beta"], f"{path}.carbon.beta"),
        compartments=comp,
        decay=decay,
    )
    if not carbon.alpha > 0:
        raise ConfigError("must be > 0", f"{path}.carbon.alpha")
    for k in ("gamma_fire", "gamma_storm", "beta"):
        if not 0 <= getattr(carbon, k) <= 1:
            raise ConfigError("must be in [0, 1]", f"{path}.carbon.{k}")
    if c["source"] not in ("configured-constant", "computed-from-profile"):
        raise ConfigError("must be configured-constant or computed-from-profile", f"{path}.carbon.source")
    return Species(name, growth, carbon), c["source"]


def validate(resolved: dict) -> ScenarioConfig:
    species, sources = {}, {}
    for name, block in resolved["species"].items():
        species[name], sources[name] = _build_species(name, block, f"species.{name}")

    e = resolved["economics"]
    p = e["price"]
    price = _build("economics.price", PriceSchedule, kind=p["kind"],
                   mu=_num(p["mu"], "economics.price.mu"),
                   p_f_max=_num(p["p_f_max"], "economics.price.p_f_max"),
                   p_const=_num(p["p_const"], "economics.price.p_const"))
    bounds = {"p_c": (0.0, math.inf, False), "r": (0.0, math.inf, True),
              "regen_cost": (0.0, math.inf, False), "salvage_fraction": (0.0, 1.0, False)}
    values = {}
    for key, (lo, hi, open_lo) in bounds.items():
        x = _num(e[key], f"economics.{key}")
        if (x <= lo if open_lo else x < lo) or x > hi or not math.isfinite(x):
            interval = f"{'(' if open_lo else '['}{lo:g}, {hi:g}{']' if math.isfinite(hi) else ')'}"
            raise ConfigError(f"must be in {interval}, got {x:g}", f"economics.{key}")
        values[key] = x
    econ = EconomicEnv(**values)

    d = resolved["damage"]
    if d["type"] not in ("fire", "storm"):
        raise ConfigError("must be fire or storm", "damage.type")
    rate = _num(d["rate"], "damage.rate")
    if not (rate >= 0 and math.isfinite(rate)):
        raise ConfigError(f"damage_rate must be >= 0, got {rate}", "damage.rate")

    run = resolved["run"]
    if run["mode"] not in MODES:
        raise ConfigError(f"must be one of {MODES}", "run.mode")
    run_species = run["species"] or next(iter(species))
    if run_species not in species:
        raise ConfigError(f"unknown species {run_species!r}", "run.species")
    rotation = run["rotation"]
    if rotation is not None:
        rotation = math.inf if rotation in ("inf", "infinite") else _num(rotation, "run.rotation")
        if not rotation > 0:
            raise ConfigError("must be > 0", "run.rotation")

    s = run["simulation"]
    sim = _build("run.simulation", SimulationConfig,
                 n_paths=int(_num(s["n_paths"], "run.simulation.n_paths")),
                 horizon=_num(s["horizon"], "run.simulation.horizon"),
                 rng_seed=int(_num(s["rng_seed"], "run.simulation.rng_seed")),
                 time_step=_num(s["time_step"], "run.simulation.time_step"),
                 stock_horizon=_num(s["stock_horizon"], "run.simulation.stock_horizon"),
                 chunk_size=int(_num(s["chunk_size"], "run.simulation.chunk_size")))
    so = run["solver"]
    solver = SolverSettings(t_max=_num(so["t_max"], "run.solver.t_max"),
                            grid_step=_num(so["grid_step"], "run.solver.grid_step"))
    if not (solver.t_max > solver.grid_step > 0):
        raise ConfigError("need t_max > grid_step > 0", "run.solver")

    sw = run["sweep"]
    sw_species = sw["species"] or [run_species]
    for name in sw_species:
        if name not in species:
            raise ConfigError(f"unknown species {name!r}", "run.sweep.species")
    for key in ("p_c_values", "lambda_values"):
        if not isinstance(sw[key], list) or not sw[key]:
            raise ConfigError("must be a non-empty list", f"run.sweep.{key}")
        for i, v in enumerate(sw[key]):
            if not _num(v, f"run.sweep.{key}[{i}]") >= 0:
                raise ConfigError("must be >= 0", f"run.sweep.{key}[{i}]")
    grid = _build("run.sweep", SweepGrid, p_c_values=sw["p_c_values"], lambda_values=sw["lambda_values"],
                  species=tuple(sw_species), damage_type=sw["damage_type"] or d["type"])
    if not isinstance(sw["monte_carlo"], bool):
        raise ConfigError("must be true or false", "run.sweep.monte_carlo")

    cu = run["curves"]
    for key in ("max_age", "step", "decay_years"):
        if not _num(cu[key], f"run.curves.{key}") > 0:
            raise ConfigError("must be > 0", f"run.curves.{key}")

    return ScenarioConfig(
        resolved=resolved, species=species, carbon_source=sources, econ=econ, price=price,
        damage_type=d["type"], damage_rate=rate, mode=run["mode"], run_species=run_species,
        rotation=rotation, simulation=sim, solver=solver, sweep=grid,
        sweep_monte_carlo=sw["monte_carlo"], curves=dict(cu),
    )


def _deep_update(base: dict, overrides: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_update(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_text(text: str, source: str = "<string>"):
    try:
        return yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigError(f"{source}: {exc.problem}", line=mark.line + 1 if mark else None,
                          column=mark.column + 1 if mark else None) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    """Read, resolve and validate a scenario file.

    ``overrides`` is merged over the file before validation; an output JSON
    written by :func:`carbon_rotation.cli.run` carries its full resolved
    scenario under ``"config"`` and can be passed back this way.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    raw = parse_text(text, str(path))
    if overrides:
        raw = _deep_update(raw if isinstance(raw, dict) else {}, overrides)
    return validate(resolve(raw))


def config_from_dict(raw: dict) -> ScenarioConfig:
    return validate(resolve(raw))


def bundled_preset(name: str) -> Path:
    """Path of a scenario shipped with the package (e.g. ``pine-fire``)."""
    ref = importlib.resources.files("carbon_rotation") / "scenarios" / f"{name}.yaml"
    path = Path(str(ref))
    if not path.exists():
        available = sorted(p.stem for p in path.parent.glob("*.yaml"))
        raise ConfigError(f"no bundled scenario {name!r}; available: {available}")
    return path
