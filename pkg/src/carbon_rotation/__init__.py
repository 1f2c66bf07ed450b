"""Optimal forest rotation with carbon pricing and stand-destroying damage risk."""
from .carbon import CarbonParams, EventCarbonProfile, SpeciesCarbon, npv_retained_fraction, remaining_stock_fraction
from .economics import EconomicEnv, RotationProblem, foc_residual, land_value, land_value_limit
from .growth import GrowthCurve, PriceSchedule, stem_increment, stem_volume, timber_price
from .optimize import RotationSolution, SolverSettings, solve_optimal_rotation
from .presets import SPECIES, build_problem
from .simulation import SimulationConfig, SimulationSummary, simulate
from .sweep import SweepGrid, run_sweep

__version__ = "0.1.0"
