"""Optimal rotation search.

The land value is scanned on a 1-year grid; every cell where the optimality
residual falls from positive to non-positive brackets a local maximum, which
is refined by golden-section search on the land value and polished with
Brent's method on the residual.  If the residual is still positive at the
horizon the stand is worth more left standing, and the never-fell value is
compared with the best finite candidate.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import optimize as spo

from .economics import (
    RotationProblem,
    foc_residual,
    land_value,
    land_value_limit,
)
from .growth import T_MAX_DEFAULT

Regime = Literal["finite", "infinite", "no_positive_value"]

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
TIE_TOLERANCE = 1e-9
INFINITE_SLOPE_THRESHOLD = 1e-9
FOC_TOLERANCE = 1e-6


class ConvergenceError(RuntimeError):
    """Refinement did not converge; ``bracket`` holds the best interval found."""

    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(f"{message} (best bracket {bracket})")
        self.bracket = bracket


class RegimeChangeError(ValueError):
    """A sensitivity was requested across a finite/infinite regime boundary."""


@dataclass(frozen=True)
class SolverSettings:
    t_max: float = T_MAX_DEFAULT
    grid_step: float = 1.0
    xtol: float = 1e-10
    max_iter: int = 200


@dataclass
class RotationSolution:
    regime: Regime
    T_star: float  # inf for the infinite regime
    lev: float
    foc_residual_at_solution: float
    lev_at_t_max: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_finite(self) -> bool:
        return self.regime == "finite"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns (x, f(x), iterations)."""
    a, b = lo, hi
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        if it >= max_iter:
            raise ConvergenceError("golden-section search hit max iterations", (a, b))
        it += 1
        # ties move the upper end down, favouring the shorter rotation
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x), it


def _refine(problem: RotationProblem, lo: float, hi: float, settings: SolverSettings) -> dict:
    lev = lambda T: float(land_value(problem, T))  # noqa: E731
    T_gs, V_gs, gs_iter = golden_section_max(lev, lo, hi, tol=1e-8, max_iter=settings.max_iter)
    foc = lambda T: float(foc_residual(problem, T))  # noqa: E731
    f_lo, f_hi = foc(lo), foc(hi)
    method = "golden-section"
    T_star, iters = T_gs, 0
    if f_lo > 0 >= f_hi:
        try:
            T_star, res = spo.brentq(foc, lo, hi, xtol=settings.xtol, rtol=4 * np.finfo(float).eps,
                                     maxiter=settings.max_iter, full_output=True)
        except RuntimeError as exc:
            raise ConvergenceError(str(exc), (lo, hi)) from exc
        if not res.converged:
            raise ConvergenceError("root polish did not converge", (lo, hi))
        iters = res.iterations
        method = "golden-section+brentq"
        if lev(T_star) < V_gs - 1e-9 * max(1.0, abs(V_gs)):
            T_star = T_gs
            method = "golden-section"
    return {
        "T": T_star,
        "lev": lev(T_star),
        "bracket": (lo, hi),
        "golden_iterations": gs_iter,
        "root_iterations": iters,
        "method": method,
    }


def solve_optimal_rotation(problem: RotationProblem, settings: SolverSettings = SolverSettings()) -> RotationSolution:
    """Find the LEV-maximizing rotation, or detect the infinite / no-value regimes."""
    grid = np.arange(settings.grid_step, settings.t_max + 0.5 * settings.grid_step, settings.grid_step)
    values = np.asarray(land_value(problem, grid))
    resid = np.asarray(foc_residual(problem, grid, normalized=True))

    candidates = []
    # maximum inside the first cell: residual already non-positive at the first node
    if resid[0] <= 0:
        lo = settings.grid_step * 1e-3
        if foc_residual(problem, lo) > 0:
            candidates.append(_refine(problem, lo, float(grid[0]), settings))
    falls = np.nonzero((resid[:-1] > 0) & (resid[1:] <= 0))[0]
    for i in falls:
        candidates.append(_refine(problem, float(grid[i]), float(grid[i + 1]), settings))

    rising_at_horizon = bool(resid[-1] > INFINITE_SLOPE_THRESHOLD)
    v_inf = land_value_limit(problem) if rising_at_horizon else None

    best = None
    for cand in candidates:  # ascending in T, strict improvement keeps the shorter rotation on ties
        if best is None or cand["lev"] > best["lev"] + TIE_TOLERANCE * max(1.0, abs(best["lev"])):
            best = cand
    diagnostics = {
        "grid_step": settings.grid_step,
        "t_max": settings.t_max,
        "n_local_maxima": len(candidates),
        "grid_argmax_T": float(grid[int(np.argmax(values))]),
        "tie_break": "shorter rotation preferred within relative 1e-9",
    }

    if v_inf is not None and (best is None or v_inf > best["lev"] + TIE_TOLERANCE * max(1.0, abs(best["lev"]))):
        sol = RotationSolution(
            regime="infinite",
            T_star=math.inf,
            lev=v_inf,
            foc_residual_at_solution=float(resid[-1]),
            lev_at_t_max=float(values[-1]),
            diagnostics={**diagnostics, "method": "horizon residual > 0", "bracket": (float(grid[-1]), math.inf)},
        )
    elif best is None:
        # no interior stationary point and land value not rising at the horizon:
        # the supremum is approached as T -> 0
        sol = RotationSolution(
            regime="no_positive_value" if values.max() < 0 else "finite",
            T_star=float(grid[int(np.argmax(values))]),
            lev=float(values.max()),
            foc_residual_at_solution=float(resid[int(np.argmax(values))]),
            diagnostics={**diagnostics, "method": "grid", "bracket": None},
        )
        if sol.regime == "finite":
            raise ConvergenceError("no interior optimum found", (0.0, settings.t_max))
    else:
        sol = RotationSolution(
            regime="finite",
            T_star=best["T"],
            lev=best["lev"],
            foc_residual_at_solution=float(foc_residual(problem, best["T"], normalized=True)),
            diagnostics={**diagnostics, **{k: best[k] for k in ("bracket", "golden_iterations", "root_iterations", "method")}},
        )

    if sol.lev < 0:
        sol.regime = "no_positive_value"
    return sol


def solution_sensitivity(problem: RotationProblem, param: Literal["p_c", "lambda"], delta: float,
                         settings: SolverSettings = SolverSettings()) -> float:
    """Signed change in optimal rotation, ``T*(param + delta) - T*(param)``."""
    if param == "p_c":
        bumped = problem.replace(p_c=problem.econ.p_c + delta)
    elif param == "lambda":
        bumped = problem.replace(damage_rate=problem.damage_rate + delta)
    else:
        raise ValueError(f"unknown parameter {param!r}")
    if delta == 0:
        base = solve_optimal_rotation(problem, settings)
        if not base.is_finite:
            raise RegimeChangeError(f"base problem is in the {base.regime} regime")
        return 0.0
    base = solve_optimal_rotation(problem, settings)
    other = solve_optimal_rotation(bumped, settings)
    if not (base.is_finite and other.is_finite):
        raise RegimeChangeError(f"regime change: {base.regime} -> {other.regime}")
    return other.T_star - base.T_star
