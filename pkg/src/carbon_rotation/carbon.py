"""Carbon pools released after storm, fire and harvest.

After an event the stand's carbon is split into pools that are either
released at once, decay exponentially, or stay stored.  Discounting the
release stream gives the retained fractions used in the revenue functions:
``gamma`` after damage and ``beta`` after final felling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

Release = Literal["immediate", "exponential", "permanent"]
SHARE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CarbonPool:
    share: float
    release: Release = "exponential"
    rate: float = 0.0
    name: str = ""

    def __post_init__(self):
        if not 0.0 <= self.share <= 1.0:
            raise ValueError(f"pool share must be in [0, 1], got {self.share}")
        if self.release not in ("immediate", "exponential", "permanent"):
            raise ValueError(f"unknown release profile {self.release!r}")
        if self.release == "exponential" and not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"exponential pool needs a positive rate, got {self.rate}")

    def remaining(self, s):
        if self.release == "immediate":
            return np.zeros_like(s, dtype=float)
        if self.release == "permanent":
            return np.ones_like(s, dtype=float)
        return np.exp(-self.rate * s)

    def release_weight(self, r: float) -> float:
        """Present value, at the event, of releasing one unit from this pool."""
        if self.release == "immediate":
            return 1.0
        if self.release == "permanent":
            return 0.0
        return self.rate / (self.rate + r)

    def integrated_remaining(self, d):
        """Integral of the remaining fraction over ``[0, d]`` (years)."""
        if self.release == "immediate":
            return np.zeros_like(d, dtype=float)
        if self.release == "permanent":
            return np.asarray(d, dtype=float) * 1.0
        return -np.expm1(-self.rate * d) / self.rate


@dataclass(frozen=True)
class EventCarbonProfile:
    label: Literal["storm", "fire", "harvest"]
    pools: tuple[CarbonPool, ...]

    def __post_init__(self):
        if self.label not in ("storm", "fire", "harvest"):
            raise ValueError(f"unknown event label {self.label!r}")
        object.__setattr__(self, "pools", tuple(self.pools))
        total = math.fsum(p.share for p in self.pools)
        if abs(total - 1.0) > SHARE_TOLERANCE:
            raise ValueError(f"{self.label} pool shares sum to {total}, expected 1")

    @property
    def immediate_share(self) -> float:
        return math.fsum(p.share for p in self.pools if p.release == "immediate")


def remaining_stock_fraction(profile: EventCarbonProfile, s):
    """Fraction of the event-time carbon stock still stored ``s`` years later."""
    s = np.asarray(s, dtype=float)
    if np.any(np.isnan(s)) or np.any(s < 0):
        raise ValueError(f"years since event must be >= 0, got {s!r}")
    out = sum(p.share * p.remaining(s) for p in profile.pools)
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def npv_retained_fraction(profile: EventCarbonProfile, r: float) -> float:
    """One minus the discounted cost of all future releases, per unit of event stock."""
    if not (r >= 0 and math.isfinite(r)):
        raise ValueError(f"discount rate must be >= 0, got {r}")
    return 1.0 - math.fsum(p.share * p.release_weight(r) for p in profile.pools)


def integrated_remaining_stock(profile: EventCarbonProfile, d):
    """Integral of ``remaining_stock_fraction`` over ``[0, d]``."""
    d = np.asarray(d, dtype=float)
    return sum(p.share * p.integrated_remaining(d) for p in profile.pools)


def carbon_stock(alpha: float, volume):
    """Carbon (t CO2/ha) in living biomass for a stem volume (m3/ha)."""
    volume = np.asarray(volume, dtype=float)
    if np.any(volume < 0):
        raise ValueError("volume must be >= 0")
    out = alpha * volume
    return out if np.ndim(out) else float(out)


# --- building profiles from biomass compartments -------------------------------------


@dataclass(frozen=True)
class Compartments:
    """Shares of total living-biomass carbon by tree compartment."""

    stem: float
    branches: float
    foliage: float
    roots: float  # stump and coarse roots

    def __post_init__(self):
        total = self.stem + self.branches + self.foliage + self.roots
        if min(self.stem, self.branches, self.foliage, self.roots) < 0 or abs(total - 1) > SHARE_TOLERANCE:
            raise ValueError(f"compartment shares must be non-negative and sum to 1, got {total}")


@dataclass(frozen=True)
class DecayRates:
    """Exponential decay rates (1/yr) for dead wood and wood products.

    The defaults are calibration values, chosen so that the discounted
    retained fractions at r = 0.03 land on the published species constants.
    """

    stem: float = 0.024  # stem and stump, 20 cm class
    branches: float = 0.04  # 2 cm class
    foliage: float = 1.0
    long_products: float = 0.012
    medium_products: float = 0.03


@dataclass(frozen=True)
class BurnShares:
    foliage: float = 1.0
    branches: float = 0.75
    stem: float = 0.25


@dataclass(frozen=True)
class SawmillShares:
    """Fate of harvested stemwood carbon."""

    released_at_mill: float = 0.56
    long_of_rest: float = 0.50
    medium_of_rest: float = 0.15


def _dead_wood_pools(c: Compartments, k: DecayRates, burnt: BurnShares | None = None,
                     include_stem: bool = True) -> list[CarbonPool]:
    b = burnt or BurnShares(0.0, 0.0, 0.0)
    pools = []
    burnt_total = c.foliage * b.foliage + c.branches * b.branches
    if include_stem:
        burnt_total += c.stem * b.stem
    if burnt_total > 0:
        pools.append(CarbonPool(burnt_total, "immediate", name="burnt"))
    if include_stem:
        pools.append(CarbonPool(c.stem * (1 - b.stem), "exponential", k.stem, "stem"))
    pools += [
        CarbonPool(c.roots, "exponential", k.stem, "stump_roots"),
        CarbonPool(c.branches * (1 - b.branches), "exponential", k.branches, "branches"),
        CarbonPool(c.foliage * (1 - b.foliage), "exponential", k.foliage, "foliage"),
    ]
    return [p for p in pools if p.share > 0]


def storm_profile(c: Compartments, k: DecayRates = DecayRates()) -> EventCarbonProfile:
    """Whole tree left on site to decay."""
    return EventCarbonProfile("storm", tuple(_dead_wood_pools(c, k)))


def fire_profile(c: Compartments, k: DecayRates = DecayRates(),
                 burnt: BurnShares = BurnShares()) -> EventCarbonProfile:
    return EventCarbonProfile("fire", tuple(_dead_wood_pools(c, k, burnt)))


def harvest_profile(c: Compartments, k: DecayRates = DecayRates(),
                    mill: SawmillShares = SawmillShares()) -> EventCarbonProfile:
    """Stemwood to sawmill products, residues left on site."""
    rest = c.stem * (1 - mill.released_at_mill)
    long_ = rest * mill.long_of_rest
    medium = rest * mill.medium_of_rest
    released = c.stem - long_ - medium
    pools = [
        CarbonPool(released, "immediate", name="sawmill_and_short_products"),
        CarbonPool(long_, "exponential", k.long_products, "long_products"),
        CarbonPool(medium, "exponential", k.medium_products, "medium_products"),
    ]
    pools += _dead_wood_pools(c, k, include_stem=False)
    return EventCarbonProfile("harvest", tuple(pools))


@dataclass(frozen=True)
class CarbonParams:
    """Carbon inputs to the revenue functions.

    ``gamma`` is the retained fraction after damage for the chosen damage
    type, excluding any salvage (salvage is a separate revenue term).
    """

    alpha: float
    gamma: float
    beta: float
    gamma_source: Literal["configured-constant", "computed-from-profile"] = "configured-constant"
    beta_source: Literal["configured-constant", "computed-from-profile"] = "configured-constant"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        for name in ("gamma", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @classmethod
    def from_profiles(cls, alpha: float, damage: EventCarbonProfile,
                      harvest: EventCarbonProfile, r: float) -> "CarbonParams":
        return cls(
            alpha=alpha,
            gamma=npv_retained_fraction(damage, r),
            beta=npv_retained_fraction(harvest, r),
            gamma_source="computed-from-profile",
            beta_source="computed-from-profile",
        )


@dataclass(frozen=True)
class SpeciesCarbon:
    """Per-species carbon data: conversion factor, published constants, compartments."""

    alpha: float
    gamma_fire: float
    gamma_storm: float
    beta: float
    compartments: Compartments
    decay: DecayRates = field(default_factory=DecayRates)

    def profile(self, label: str) -> EventCarbonProfile:
        if label == "storm":
            return storm_profile(self.compartments, self.decay)
        if label == "fire":
            return fire_profile(self.compartments, self.decay)
        if label == "harvest":
            return harvest_profile(self.compartments, self.decay)
        raise ValueError(f"unknown event label {label!r}")

    def params(self, damage_type: str, source: str = "configured-constant",
               r: float = 0.03) -> CarbonParams:
        if source == "computed-from-profile":
            return CarbonParams.from_profiles(self.alpha, self.profile(damage_type),
                                              self.profile("harvest"), r)
        gamma = {"fire": self.gamma_fire, "storm": self.gamma_storm}[damage_type]
        return CarbonParams(self.alpha, gamma, self.beta)


PINE_CARBON = SpeciesCarbon(
    alpha=1.29, gamma_fire=0.403, gamma_storm=0.525, beta=0.319,
    compartments=Compartments(stem=0.57, branches=0.12, foliage=0.03, roots=0.28),
)
SPRUCE_CARBON = SpeciesCarbon(
    alpha=1.36, gamma_fire=0.387, gamma_storm=0.508, beta=0.303,
    compartments=Compartments(stem=0.56, branches=0.12, foliage=0.07, roots=0.25),
)
