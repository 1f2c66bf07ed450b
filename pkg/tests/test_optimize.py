import math

import numpy as np
import pytest

from carbon_rotation.economics import foc_residual, land_value, land_value_limit
from carbon_rotation.growth import PriceSchedule, stem_volume
from carbon_rotation.optimize import (
    ConvergenceError,
    RegimeChangeError,
    SolverSettings,
    golden_section_max,
    solution_sensitivity,
    solve_optimal_rotation,
)
from carbon_rotation.presets import build_problem

from conftest import brute_force_argmax


def test_faustmann_matches_brute_force(faustmann_pine):
    sol = solve_optimal_rotation(faustmann_pine)
    T_bf, V_bf = brute_force_argmax(lambda T: land_value(faustmann_pine, T), 1.0, 300.0)
    assert sol.regime == "finite"
    assert abs(sol.T_star - T_bf) <= 0.05
    assert sol.lev == pytest.approx(V_bf, rel=1e-6)
    assert abs(sol.foc_residual_at_solution) < 1e-6


@pytest.mark.parametrize("kw", [
    dict(species="pine", damage_type="fire", p_c=35.0, damage_rate=0.004),
    dict(species="spruce", damage_type="storm", p_c=70.0, damage_rate=0.009),
    dict(species="pine", damage_type="storm", p_c=60.0, damage_rate=0.003, regen_cost=600.0),
])
def test_age_dependent_price_matches_brute_force(kw):
    p = build_problem(**kw)
    sol = solve_optimal_rotation(p)
    T_bf, V_bf = brute_force_argmax(lambda T: land_value(p, T), 1.0, 1000.0)
    assert abs(sol.T_star - T_bf) <= 0.05
    assert sol.lev == pytest.approx(V_bf, rel=1e-6)


def test_spruce_high_carbon_price_never_fells():
    p = build_problem("spruce", "fire", p_c=100.0, damage_rate=0.0)
    sol = solve_optimal_rotation(p)
    assert sol.regime == "infinite"
    assert sol.T_star == math.inf
    assert sol.lev == pytest.approx(land_value_limit(p), rel=1e-14)
    # no finite rotation beats the limit
    grid = np.arange(1.0, 1001.0, 1.0)
    assert np.max(land_value(p, grid)) <= sol.lev


def test_carbon_price_lengthens_rotation():
    t0 = solve_optimal_rotation(build_problem("pine", p_c=0.0, damage_rate=0.005)).T_star
    t50 = solve_optimal_rotation(build_problem("pine", p_c=50.0, damage_rate=0.005)).T_star
    assert t50 > t0


def test_sensitivity_signs():
    p = build_problem("pine", p_c=25.0, damage_rate=0.002)
    assert solution_sensitivity(p, "lambda", 0.008) < 0
    p = build_problem("pine", p_c=0.0, damage_rate=0.005)
    assert solution_sensitivity(p, "p_c", 25.0) > 0
    assert solution_sensitivity(p, "p_c", 0.0) == 0.0


def test_sensitivity_across_regimes_raises():
    p = build_problem("spruce", p_c=50.0, damage_rate=0.0)
    with pytest.raises(RegimeChangeError):
        solution_sensitivity(p, "p_c", 50.0)
    with pytest.raises(ValueError):
        solution_sensitivity(p, "r", 0.01)


@pytest.mark.parametrize("species", ["pine", "spruce"])
def test_infinite_regime_persists_as_price_rises(species):
    for lam in (0.0, 0.003, 0.007, 0.01):
        regimes = [solve_optimal_rotation(build_problem(species, p_c=pc, damage_rate=lam)).regime
                   for pc in range(0, 101, 10)]
        first = regimes.index("infinite") if "infinite" in regimes else len(regimes)
        assert all(r == "infinite" for r in regimes[first:])
        assert all(r == "finite" for r in regimes[:first])


@pytest.mark.parametrize("species", ["pine", "spruce"])
def test_reed_reduction(species):
    # zero carbon price with damage: classical fire-risk rotation, shorter than Faustmann
    price = PriceSchedule.constant(60.0)
    p = build_problem(species, p_c=0.0, damage_rate=0.008, price=price)
    sol = solve_optimal_rotation(p)
    r, lam = 0.03, 0.008
    s = r + lam

    def reed(T):
        return s / r * 60.0 * stem_volume(p.growth, T) * np.exp(-s * T) / (1 - np.exp(-s * T))

    T_bf, _ = brute_force_argmax(reed, 1.0, 300.0)
    assert abs(sol.T_star - T_bf) <= 0.05
    faust = solve_optimal_rotation(p.replace(damage_rate=0.0)).T_star
    assert sol.T_star < faust


def test_no_positive_value_regime():
    sol = solve_optimal_rotation(build_problem("pine", regen_cost=3000.0, damage_rate=0.01))
    assert sol.regime == "no_positive_value"
    assert sol.lev < 0


def test_diagnostics_and_serialization(faustmann_pine):
    sol = solve_optimal_rotation(faustmann_pine)
    d = sol.to_dict()
    assert d["regime"] == "finite"
    assert "tie_break" in d["diagnostics"]
    assert d["diagnostics"]["n_local_maxima"] >= 1
    lo, hi = d["diagnostics"]["bracket"]
    assert lo <= sol.T_star <= hi


def test_shorter_horizon_keeps_infinite_decision():
    p = build_problem("spruce", p_c=100.0, damage_rate=0.01)
    assert solve_optimal_rotation(p).regime == "infinite"
    short = solve_optimal_rotation(p, SolverSettings(t_max=200.0))
    assert short.regime == "infinite"
    assert foc_residual(p, 200.0) > 0


def test_golden_section_on_parabola():
    x, fx, it = golden_section_max(lambda x: -(x - 2.345) ** 2, 0.0, 10.0, tol=1e-10)
    assert x == pytest.approx(2.345, abs=1e-9)
    assert fx == pytest.approx(0.0, abs=1e-15)
    assert it > 0


def test_golden_section_ties_prefer_lower_end():
    x, _, _ = golden_section_max(lambda x: 1.0, 3.0, 9.0, tol=1e-8)
    assert x == pytest.approx(3.0, abs=1e-7)


def test_golden_section_reports_bracket_on_failure():
    with pytest.raises(ConvergenceError) as info:
        golden_section_max(lambda x: -x * x, -1.0, 1.0, tol=1e-12, max_iter=5)
    lo, hi = info.value.bracket
    assert -1.0 <= lo < hi <= 1.0
