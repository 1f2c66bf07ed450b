"""Single-rotation revenues, land expectation value and the optimality residual.

With exponentially distributed damage ages (rate ``lam``) the land value of a
rotation length ``T`` is::

    V(T) = [ int_0^T D(t) lam e^(-lam t) dt + H(T) e^(-lam T) ]
           / [ r/(lam+r) (1 - e^(-(lam+r) T)) ]

where ``D(t)`` is the net present value of a rotation destroyed at age ``t``
and ``H(T)`` that of a rotation felled at ``T``.  Every piece is a
polynomial-times-exponential integral, so ``V`` is evaluated in closed form;
adaptive quadrature is only needed for salvage under an age-dependent price.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .carbon import CarbonParams, EventCarbonProfile
from .growth import (
    GrowthCurve,
    PriceSchedule,
    discounted_increment_integral,
    stem_increment,
    stem_volume,
    timber_price,
    timber_price_derivative,
)

MIN_ROTATION = 1e-6


class NonFiniteValueError(ArithmeticError):
    """Land value is undefined (rotation too short for the recursion divisor)."""


@dataclass(frozen=True)
class EconomicEnv:
    p_c: float = 0.0
    r: float = 0.03
    regen_cost: float = 0.0
    salvage_fraction: float = 0.0

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"discount rate r must be > 0, got {self.r}")
        if not self.p_c >= 0:
            raise ValueError(f"carbon price p_c must be >= 0, got {self.p_c}")
        if not self.regen_cost >= 0:
            raise ValueError(f"regen_cost must be >= 0, got {self.regen_cost}")
        if not 0.0 <= self.salvage_fraction <= 1.0:
            raise ValueError(f"salvage_fraction must be in [0, 1], got {self.salvage_fraction}")


@dataclass(frozen=True)
class RotationProblem:
    growth: GrowthCurve
    price: PriceSchedule
    carbon: CarbonParams
    econ: EconomicEnv = EconomicEnv()
    damage_rate: float = 0.0
    # decay profiles, only needed for carbon-stock simulation
    damage_profile: EventCarbonProfile | None = None
    harvest_profile: EventCarbonProfile | None = None

    def __post_init__(self):
        if not (self.damage_rate >= 0 and math.isfinite(self.damage_rate)):
            raise ValueError(f"damage_rate must be >= 0, got {self.damage_rate}")

    def replace(self, *, p_c=None, damage_rate=None, **econ_changes) -> "RotationProblem":
        econ = self.econ
        if p_c is not None:
            econ_changes["p_c"] = p_c
        if econ_changes:
            econ = dataclasses.replace(econ, **econ_changes)
        changes = {"econ": econ}
        if damage_rate is not None:
            changes["damage_rate"] = damage_rate
        return dataclasses.replace(self, **changes)

    @property
    def carbon_value(self) -> float:
        """alpha * P_c, EUR per m3 of stem volume."""
        return self.carbon.alpha * self.econ.p_c


def _check_ages(t, strict: bool = False):
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)) or np.any(t < 0) or (strict and np.any(t <= 0)):
        raise ValueError(f"rotation age out of domain: {t!r}")
    return t


def _scalar(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def damage_revenue(problem: RotationProblem, t):
    """Net present value of one rotation that is destroyed at age ``t``."""
    t = _check_ages(t)
    g, e = problem.growth, problem.econ
    cv = problem.carbon_value
    v = stem_volume(g, t)
    disc = np.exp(-e.r * t)
    out = cv * discounted_increment_integral(g, t, e.r) - disc * ((1 - problem.carbon.gamma) * cv * v + e.regen_cost)
    if e.salvage_fraction:
        out = out + disc * e.salvage_fraction * timber_price(problem.price, t) * v
    return _scalar(out)


def harvest_revenue(problem: RotationProblem, T):
    """Net present value of one rotation felled at age ``T``."""
    T = _check_ages(T)
    g, e = problem.growth, problem.econ
    cv = problem.carbon_value
    v = stem_volume(g, T)
    net = (timber_price(problem.price, T) - (1 - problem.carbon.beta) * cv) * v - e.regen_cost
    return _scalar(cv * discounted_increment_integral(g, T, e.r) + np.exp(-e.r * T) * net)


def _discounted_volume_integral(g: GrowthCurve, T, s: float):
    """Integral of e^(-s t) v(t) over [0, T] for s > 0 (integration by parts)."""
    J = discounted_increment_integral(g, T, s)
    return (J - np.exp(-s * np.asarray(T)) * stem_volume(g, T)) / s


def _salvage_integral_quad(problem: RotationProblem, T) -> np.ndarray:
    """Integral of lam e^(-(lam+r) t) delta P_f(t) v(t) over [0, T], piecewise adaptive."""
    lam, e = problem.damage_rate, problem.econ
    s = lam + e.r

    def f(t):
        return lam * math.exp(-s * t) * e.salvage_fraction * timber_price(problem.price, t) * stem_volume(problem.growth, t)

    T = np.atleast_1d(T)
    order = np.argsort(T, kind="stable")
    out = np.empty_like(T)
    acc, prev = 0.0, 0.0
    for i in order:
        hi = T[i]
        if hi > prev:
            val, _ = integrate.quad(f, prev, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
            acc += val
            prev = hi
        out[i] = acc
    return out


def expected_damage_revenue(problem: RotationProblem, T):
    """Integral of ``D(t) lam e^(-lam t)`` over ``[0, T]`` in closed form; ``T`` may be inf."""
    T = _check_ages(T)
    lam, e, g = problem.damage_rate, problem.econ, problem.growth
    if lam == 0:
        return _scalar(np.zeros_like(T))
    s = lam + e.r
    cv = problem.carbon_value
    # carbon payments: integrate by parts, int lam e^(-lam t) I_r(t) = J_s(T) - e^(-lam T) I_r(T)
    carbon_gain = cv * (discounted_increment_integral(g, T, s) - np.exp(-lam * T) * discounted_increment_integral(g, T, e.r))
    release = (1 - problem.carbon.gamma) * cv * lam * _discounted_volume_integral(g, T, s)
    regen = e.regen_cost * lam * -np.expm1(-s * T) / s
    out = carbon_gain - release - regen
    if e.salvage_fraction:
        if problem.price.kind == "constant":
            out = out + e.salvage_fraction * problem.price.p_const * lam * _discounted_volume_integral(g, T, s)
        else:
            if not np.all(np.isfinite(T)):
                raise ValueError("salvage under an age-dependent price requires finite T")
            out = out + _salvage_integral_quad(problem, T).reshape(np.shape(T))
    return _scalar(out)


def expected_damage_revenue_quad(problem: RotationProblem, T: float) -> float:
    """Adaptive-quadrature version of :func:`expected_damage_revenue` (cross-check)."""
    lam = problem.damage_rate
    if lam == 0:
        return 0.0
    scale = max(1.0, abs(harvest_revenue(problem, T)))
    val, _ = integrate.quad(
        lambda t: damage_revenue(problem, t) * lam * math.exp(-lam * t),
        0.0, T, epsabs=1e-10 * scale, epsrel=1e-12, limit=400,
    )
    return val


def recursion_divisor(problem: RotationProblem, T):
    """``r/(lam+r) (1 - e^(-(lam+r) T))``: the closed form of the value-function divisor."""
    s = problem.damage_rate + problem.econ.r
    return _scalar(problem.econ.r / s * -np.expm1(-s * np.asarray(T, dtype=float)))


def land_value(problem: RotationProblem, T):
    """Land expectation value (EUR/ha) of bare land managed on rotation ``T``."""
    T = _check_ages(T, strict=True)
    if np.any(T < MIN_ROTATION):
        raise NonFiniteValueError(f"rotation {float(np.min(T)):g} below {MIN_ROTATION} yr: divisor underflows")
    if np.any(~np.isfinite(T)):
        raise ValueError("use land_value_limit for an infinite rotation")
    lam = problem.damage_rate
    numer = expected_damage_revenue(problem, T) + harvest_revenue(problem, T) * np.exp(-lam * T)
    out = numer / recursion_divisor(problem, T)
    bad = ~np.isfinite(out)
    if np.any(bad):
        first = float(np.atleast_1d(T)[np.atleast_1d(bad)][0])
        raise NonFiniteValueError(f"land value is not finite at T={first:g} ({int(np.sum(bad))} point(s))")
    return _scalar(out)


def land_value_limit(problem: RotationProblem) -> float:
    """Land value of never felling (the T -> inf limit)."""
    lam, r = problem.damage_rate, problem.econ.r
    if lam > 0:
        return float(expected_damage_revenue(problem, np.inf)) / (r / (lam + r))
    return problem.carbon_value * float(discounted_increment_integral(problem.growth, np.inf, r))


def foc_scale(problem: RotationProblem, T):
    """Normalizer for :func:`foc_residual`: (lam + r)(alpha P_c + P_max) v(T)."""
    s = problem.damage_rate + problem.econ.r
    v = stem_volume(problem.growth, T)
    scale = s * (problem.carbon_value + problem.price.upper_bound) * v
    return _scalar(np.maximum(scale, np.finfo(float).tiny))


def foc_residual(problem: RotationProblem, T, normalized: bool = False):
    """First-order-condition residual for the optimal rotation.

    Equals ``(s/r) e^(s T) divisor(T)^2 dV/dT`` with ``s = lam + r``, i.e. a
    strictly positive multiple of the land-value slope, so its roots are the
    stationary points of :func:`land_value`.  Salvage adds the terms
    ``(1-e^(-sT)) lam delta P_f(T) v(T)`` and ``-s * (expected salvage)``.
    """
    T = _check_ages(T, strict=True)
    g, e, c = problem.growth, problem.econ, problem.carbon
    lam, r = problem.damage_rate, e.r
    s = lam + r
    cv = problem.carbon_value
    R = e.regen_cost
    v = stem_volume(g, T)
    dv = stem_increment(g, T)
    P = timber_price(problem.price, T)
    dP = timber_price_derivative(problem.price, T)
    grow = -np.expm1(-s * T)
    decay = np.exp(-s * T)

    volume_term = (grow * dP - s * P - cv * (r * (c.beta - 1) + lam * (c.beta - c.gamma) - lam * (1 - c.gamma) * decay)) * v
    increment_term = grow * (cv * c.beta + P) * dv
    carbon_term = -cv * s * np.exp(-lam * T) * discounted_increment_integral(g, T, r)
    no_salvage = problem if not e.salvage_fraction else problem.replace(salvage_fraction=0.0)
    damage_term = -s * np.asarray(expected_damage_revenue(no_salvage, T))
    regen_term = (r + lam * decay) * R
    out = volume_term + increment_term + carbon_term + damage_term + regen_term
    if e.salvage_fraction:
        salvage = np.asarray(expected_damage_revenue(problem, T)) - np.asarray(expected_damage_revenue(no_salvage, T))
        out = out + grow * lam * e.salvage_fraction * P * v - s * salvage
    if normalized:
        out = out / foc_scale(problem, T)
    return _scalar(out)


def land_value_slope(problem: RotationProblem, T, h: float = 1e-4):
    """Centered finite difference of the land value (general-density fallback)."""
    T = np.asarray(T, dtype=float)
    return _scalar((land_value(problem, T + h) - land_value(problem, T - h)) / (2 * h))
