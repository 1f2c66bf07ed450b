"""Carbon price x damage rate sweeps and the stock/harvest frontier."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .economics import RotationProblem
from .optimize import SolverSettings, solve_optimal_rotation
from .presets import build_problem
from .simulation import SimulationConfig, average_harvest_analytic, simulate

ProblemFactory = Callable[[str, str, float, float], RotationProblem]


def _default_p_c() -> tuple[float, ...]:
    return tuple(5.0 * i for i in range(21))


def _default_lambda() -> tuple[float, ...]:
    return tuple(round(0.001 * i, 3) for i in range(11))


@dataclass(frozen=True)
class SweepGrid:
    p_c_values: tuple[float, ...] = field(default_factory=_default_p_c)
    lambda_values: tuple[float, ...] = field(default_factory=_default_lambda)
    species: tuple[str, ...] = ("pine",)
    damage_type: str = "fire"

    def __post_init__(self):
        object.__setattr__(self, "p_c_values", tuple(float(x) for x in self.p_c_values))
        object.__setattr__(self, "lambda_values", tuple(float(x) for x in self.lambda_values))
        object.__setattr__(self, "species", tuple(self.species))
        if not (self.p_c_values and self.lambda_values and self.species):
            raise ValueError("sweep grid must be non-empty")
        if self.damage_type not in ("fire", "storm"):
            raise ValueError(f"damage_type must be fire or storm, got {self.damage_type!r}")

    @property
    def size(self) -> int:
        return len(self.species) * len(self.p_c_values) * len(self.lambda_values)


@dataclass
class SweepCell:
    species: str
    damage_type: str
    p_c: float
    damage_rate: float
    regime: str = ""
    T_star: float = math.nan
    lev: float = math.nan
    foc_residual: float = math.nan
    avg_harvest: float = math.nan
    avg_carbon_stock: float = math.nan
    mean_npv: float = math.nan
    rel_std_npv: float = math.nan
    error: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _solve_cell(args) -> SweepCell:
    factory, species, damage_type, p_c, lam, sim_config, settings = args
    cell = SweepCell(species, damage_type, p_c, lam)
    try:
        problem = factory(species, damage_type, p_c, lam)
        sol = solve_optimal_rotation(problem, settings)
        cell.regime, cell.T_star, cell.lev = sol.regime, sol.T_star, sol.lev
        cell.foc_residual = sol.foc_residual_at_solution
        cell.avg_harvest = average_harvest_analytic(problem, sol.T_star)
        if sim_config is not None:
            summary = simulate(problem, sol.T_star, sim_config)
            cell.avg_carbon_stock = summary.avg_carbon_stock
            cell.mean_npv = summary.mean_npv
            cell.rel_std_npv = summary.rel_std_npv
    except Exception as exc:  # recorded per cell; a sweep never aborts
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def _preset_factory(species: str, damage_type: str, p_c: float, lam: float) -> RotationProblem:
    return build_problem(species, damage_type, p_c=p_c, damage_rate=lam)


def run_sweep(grid: SweepGrid, sim_config: SimulationConfig | None = SimulationConfig(),
              factory: ProblemFactory = _preset_factory, workers: int = 1,
              settings: SolverSettings = SolverSettings()) -> list[SweepCell]:
    """Solve every cell (species, then p_c rows, then damage-rate columns).

    ``sim_config=None`` skips the Monte Carlo columns.  With several workers
    the cells run in separate processes and the simulation inside each cell
    is kept single-process.
    """
    if sim_config is not None and workers > 1:
        sim_config = replace(sim_config, workers=1)
    jobs = [
        (factory, sp, grid.damage_type, p_c, lam, sim_config, settings)
        for sp in grid.species
        for p_c in grid.p_c_values
        for lam in grid.lambda_values
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_cell, jobs))
    return [_solve_cell(j) for j in jobs]


def rotation_matrix(cells: list[SweepCell], species: str, damage_type: str):
    """T* as a (damage rate x carbon price) matrix for contouring; inf marks never-fell cells."""
    sel = [c for c in cells if c.species == species and c.damage_type == damage_type]
    p_c = sorted({c.p_c for c in sel})
    lam = sorted({c.damage_rate for c in sel})
    mat = np.full((len(lam), len(p_c)), np.nan)
    for c in sel:
        if not c.error:
            mat[lam.index(c.damage_rate), p_c.index(c.p_c)] = c.T_star
    return np.array(lam), np.array(p_c), mat


@dataclass
class FrontierPoint:
    p_c: float
    avg_carbon_stock: float
    avg_harvest: float
    regime: str


@dataclass
class FrontierCurve:
    damage_rate: float
    points: list[FrontierPoint]
    mixed_regime: bool


def extract_frontier(cells: list[SweepCell], species: str, damage_type: str) -> list[FrontierCurve]:
    """One (stock, harvest) polyline per damage rate, ordered by carbon price."""
    sel = [c for c in cells if c.species == species and c.damage_type == damage_type and not c.error]
    curves = []
    for lam in sorted({c.damage_rate for c in sel}):
        row = sorted((c for c in sel if c.damage_rate == lam), key=lambda c: c.p_c)
        pts = [FrontierPoint(c.p_c, c.avg_carbon_stock, c.avg_harvest, c.regime) for c in row]
        curves.append(FrontierCurve(lam, pts, len({p.regime for p in pts}) > 1))
    return curves


@dataclass
class TradeoffPair:
    p_c: float
    damage_rate: float
    T_star: float
    equivalent_p_c: float  # price at damage_rate - d_lambda giving the same T*
    delta_p_c: float


def iso_rotation_tradeoffs(cells: list[SweepCell], species: str, damage_type: str,
                           d_lambda: float = 0.01) -> list[TradeoffPair]:
    """Carbon-price change worth one ``d_lambda`` step in damage rate at equal T*.

    For each finite cell at rate ``lam`` the price at rate ``lam - d_lambda``
    that yields the same optimal rotation is found by linear interpolation
    along that row.  Cells whose T* falls outside the finite part of the
    lower row are skipped.
    """
    lam, p_c, mat = rotation_matrix(cells, species, damage_type)
    out = []
    for i, l_hi in enumerate(lam):
        j_lo = np.nonzero(np.isclose(lam, l_hi - d_lambda, atol=1e-12))[0]
        if not j_lo.size:
            continue
        lower = mat[j_lo[0]]
        finite = np.isfinite(lower)
        xs, ys = p_c[finite], lower[finite]
        if xs.size < 2 or np.any(np.diff(ys) <= 0):
            continue
        for k, T in enumerate(mat[i]):
            if not np.isfinite(T) or T < ys[0] or T > ys[-1]:
                continue
            eq = float(np.interp(T, ys, xs))
            out.append(TradeoffPair(float(p_c[k]), float(l_hi), float(T), eq, eq - float(p_c[k])))
    return out
