"""Stem-volume growth curve and age-dependent timber price.

The increment model is ``v'(t) = v1 t exp(v2 t) + v3 t^3 exp(v4 t)``.  Every
integral the rest of the package needs (volume, discounted increment, the
time integral of volume) is a polynomial-times-exponential integral and is
evaluated in closed form here.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

T_MAX_DEFAULT = 1000.0
V5_RELATIVE_TOLERANCE = 0.005


class GrowthDomainError(ValueError):
    """Raised for ages or rates outside the domain of the growth model."""


def _as_age(t, name: str = "t"):
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)):
        raise GrowthDomainError(f"{name} must not be NaN")
    if np.any(arr < 0):
        raise GrowthDomainError(f"{name} must be >= 0, got {t!r}")
    return arr


def _finite_age(t, name: str = "t"):
    arr = _as_age(t, name)
    if not np.all(np.isfinite(arr)):
        raise GrowthDomainError(f"{name} must be finite, got {t!r}")
    return arr


def poly_exp_integral(n: int, b: float, t):
    """Return the integral of ``s**n * exp(b*s)`` over ``[0, t]`` for ``b < 0``.

    Uses the antiderivative ``exp(b s) * sum_k (-1)^k n!/(n-k)! s^(n-k) / b^(k+1)``.
    ``t`` may be an array and may contain ``inf``.
    """
    if not b < 0:
        raise GrowthDomainError(f"exponent rate must be negative, got {b}")
    t = np.asarray(t, dtype=float)
    # value of the antiderivative at 0 is (-1)^n n! / b^(n+1)
    at_zero = (-1) ** n * math.factorial(n) / b ** (n + 1)
    finite = np.isfinite(t)
    ts = np.where(finite, t, 0.0)
    poly = np.zeros_like(ts)
    for k in range(n + 1):
        coef = (-1) ** k * math.factorial(n) / math.factorial(n - k) / b ** (k + 1)
        poly = poly + coef * ts ** (n - k)
    at_t = np.where(finite, np.exp(b * ts) * poly, 0.0)
    out = at_t - at_zero
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GrowthCurve:
    """Closed-form stem-volume curve (m3/ha) for one species.

    ``v5`` is the configured integration constant.  It is only checked: the
    curve always uses the exact constant ``-(v1/v2**2 + 6 v3/v4**4)`` so that
    ``v(0) == 0``.
    """

    v1: float
    v2: float
    v3: float
    v4: float
    v5: float | None = None
    name: str = ""

    def __post_init__(self):
        for field in ("v1", "v2", "v3", "v4"):
            if not math.isfinite(getattr(self, field)):
                raise GrowthDomainError(f"{field} must be finite")
        if not (self.v2 < 0 and self.v4 < 0):
            raise GrowthDomainError(
                f"v2 and v4 must be negative so growth vanishes, got v2={self.v2}, v4={self.v4}"
            )
        if self.v5 is not None:
            # compared by magnitude: tables print v5 with either sign convention
            exact = self.integration_constant
            if abs(abs(self.v5) - exact) > V5_RELATIVE_TOLERANCE * exact:
                warnings.warn(
                    f"configured |v5|={abs(self.v5)} differs from the exact integration "
                    f"constant {exact:.6g} by more than {V5_RELATIVE_TOLERANCE:.1%}; the exact "
                    "value is used (v5 sign convention is ambiguous, only magnitude is checked)",
                    stacklevel=3,
                )

    @property
    def integration_constant(self) -> float:
        """Magnitude ``v1/v2**2 + 6 v3/v4**4`` that makes ``v(0) = 0``."""
        return self.v1 / self.v2**2 + 6.0 * self.v3 / self.v4**4

    @property
    def exact_v5(self) -> float:
        return -self.integration_constant

    @property
    def asymptotic_volume(self) -> float:
        return self.integration_constant


def stem_increment(curve: GrowthCurve, t):
    """Volume increment v'(t) in m3/ha/yr."""
    t = _finite_age(t)
    out = curve.v1 * t * np.exp(curve.v2 * t) + curve.v3 * t**3 * np.exp(curve.v4 * t)
    return out if np.ndim(out) else float(out)


def _increment_integral(curve: GrowthCurve, t, shift: float):
    a = curve.v2 - shift
    b = curve.v4 - shift
    if not (a < 0 and b < 0):
        raise GrowthDomainError(
            f"discounted integral diverges: v2-r={a}, v4-r={b} must both be negative"
        )
    return curve.v1 * poly_exp_integral(1, a, t) + curve.v3 * poly_exp_integral(3, b, t)


def stem_volume(curve: GrowthCurve, t):
    """Stem volume v(t) in m3/ha, with v(0) = 0 exactly.  ``t = inf`` gives the asymptote."""
    t = _as_age(t)
    return _increment_integral(curve, t, 0.0)


def discounted_increment_integral(curve: GrowthCurve, t, r: float):
    """Integral of ``exp(-r tau) v'(tau)`` over ``[0, t]``."""
    t = _as_age(t)
    if not (math.isfinite(r) and r >= 0):
        raise GrowthDomainError(f"discount rate must be finite and >= 0, got {r}")
    return _increment_integral(curve, t, r)


def volume_time_integral(curve: GrowthCurve, t):
    """Integral of v(tau) over ``[0, t]`` (m3 yr/ha), used for time-averaged stocks."""
    t = _finite_age(t)
    a, b = curve.v2, curve.v4
    out = curve.v1 * (t * poly_exp_integral(1, a, t) - poly_exp_integral(2, a, t)) + curve.v3 * (
        t * poly_exp_integral(3, b, t) - poly_exp_integral(4, b, t)
    )
    return out


@dataclass(frozen=True)
class PriceSchedule:
    """Timber stumpage price (EUR/m3) as a function of harvest age."""

    kind: Literal["age-dependent", "constant"] = "age-dependent"
    mu: float = 0.015
    p_f_max: float = 60.0
    p_const: float = 60.0

    def __post_init__(self):
        if self.kind not in ("age-dependent", "constant"):
            raise ValueError(f"unknown price kind {self.kind!r}")
        if self.kind == "age-dependent":
            if not self.p_f_max >= 0:
                raise ValueError(f"p_f_max must be >= 0, got {self.p_f_max}")
            if not self.mu > 0:
                raise ValueError(f"mu must be > 0, got {self.mu}")
        elif not self.p_const >= 0:
            raise ValueError(f"p_const must be >= 0, got {self.p_const}")

    @classmethod
    def constant(cls, price: float) -> "PriceSchedule":
        return cls(kind="constant", p_const=price, p_f_max=price)

    @property
    def upper_bound(self) -> float:
        return self.p_f_max if self.kind == "age-dependent" else self.p_const


def _price_ratio_parts(mu: float, t):
    x = mu * t
    # (mu t)^2 e^(mu t) overflows near t ~ 47000 yr at mu = 0.015; the ratio is 1 there
    with np.errstate(over="ignore", invalid="ignore"):
        q = x * x * np.exp(x)
    return x, q


def timber_price(schedule: PriceSchedule, t):
    """Price at harvest age t."""
    t = _as_age(t)
    if schedule.kind == "constant":
        out = np.full_like(t, schedule.p_const, dtype=float)
        return out if out.ndim else float(out)
    _, q = _price_ratio_parts(schedule.mu, t)
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isfinite(q), q / (1.0 + q), 1.0)
    out = ratio * schedule.p_f_max
    return out if np.ndim(out) else float(out)


def timber_price_derivative(schedule: PriceSchedule, t):
    """dP/dt in EUR/m3/yr."""
    t = _as_age(t)
    if schedule.kind == "constant":
        out = np.zeros_like(t, dtype=float)
        return out if out.ndim else float(out)
    x, q = _price_ratio_parts(schedule.mu, t)
    finite = np.isfinite(q)
    qs = np.where(finite, q, 0.0)
    # dq/dt = mu^2 t e^(mu t) (2 + mu t);  d/dt q/(1+q) = q' / (1+q)^2
    dq = schedule.mu**2 * np.where(finite, t, 0.0) * np.exp(np.where(finite, x, 0.0)) * (2.0 + np.where(finite, x, 0.0))
    out = np.where(finite, schedule.p_f_max * dq / (1.0 + qs) ** 2, 0.0)
    return out if np.ndim(out) else float(out)


def tabulate_curves(curve: GrowthCurve, schedule: PriceSchedule, ages) -> dict[str, np.ndarray]:
    """Columns for a growth/price table: age, volume, increment, price."""
    ages = _finite_age(ages, "ages")
    ages = np.atleast_1d(ages)
    return {
        "age_years": ages,
        "volume_m3_ha": np.atleast_1d(stem_volume(curve, ages)),
        "increment_m3_ha_yr": np.atleast_1d(stem_increment(curve, ages)),
        "price_eur_m3": np.atleast_1d(timber_price(schedule, ages)),
    }


PINE = GrowthCurve(v1=0.0632, v2=-0.0153, v3=0.00414, v4=-0.104, v5=-483.0, name="pine")
SPRUCE = GrowthCurve(v1=0.235, v2=-0.0153, v3=0.00621, v4=-0.109, v5=-1270.0, name="spruce")
