"""Built-in species data and problem construction for the Finnish pine/spruce cases."""
from __future__ import annotations

from dataclasses import dataclass

from .carbon import PINE_CARBON, SPRUCE_CARBON, SpeciesCarbon
from .economics import EconomicEnv, RotationProblem
from .growth import PINE, SPRUCE, GrowthCurve, PriceSchedule


@dataclass(frozen=True)
class Species:
    name: str
    growth: GrowthCurve
    carbon: SpeciesCarbon


SPECIES = {
    "pine": Species("pine", PINE, PINE_CARBON),
    "spruce": Species("spruce", SPRUCE, SPRUCE_CARBON),
}


def build_problem(species: Species | str, damage_type: str = "fire", p_c: float = 0.0,
                  damage_rate: float = 0.0, r: float = 0.03, regen_cost: float = 0.0,
                  salvage_fraction: float = 0.0, price: PriceSchedule | None = None,
                  carbon_source: str = "configured-constant") -> RotationProblem:
    """Rotation problem for a species with its decay profiles attached."""
    sp = SPECIES[species] if isinstance(species, str) else species
    return RotationProblem(
        growth=sp.growth,
        price=price or PriceSchedule(),
        carbon=sp.carbon.params(damage_type, carbon_source, r),
        econ=EconomicEnv(p_c=p_c, r=r, regen_cost=regen_cost, salvage_fraction=salvage_fraction),
        damage_rate=damage_rate,
        damage_profile=sp.carbon.profile(damage_type),
        harvest_profile=sp.carbon.profile("harvest"),
    )
