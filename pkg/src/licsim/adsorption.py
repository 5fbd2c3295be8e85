"""Competitive Langmuir adsorption of several gas species on one surface.

Coverages are computed from the non-dissociative multi-species isotherm

    theta_i = K_i P_i / (1 + sum_j K_j P_j)

Inert species (e.g. N2) enter as ordinary entries: they occupy sites and
push the other coverages down but take part in no reaction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

from licsim.errors import InvalidInputError


@dataclass(frozen=True)
class AdsorbateSpec:
    name: str
    equilibrium_constant: float  # 1/mbar
    partial_pressure: float  # mbar

    def __post_init__(self):
        for label, value in (("equilibrium_constant", self.equilibrium_constant),
                             ("partial_pressure", self.partial_pressure)):
            if not math.isfinite(value) or value < 0:
                raise InvalidInputError(f"{self.name}: {label} must be finite and >= 0, got {value!r}")

    @property
    def loading(self) -> float:
        return self.equilibrium_constant * self.partial_pressure


@dataclass(frozen=True)
class CoverageResult:
    coverages: dict[str, float]
    vacant: float

    def __getitem__(self, name: str) -> float:
        return self.coverages[name]


class Isotherm(Protocol):
    def __call__(self, species: Sequence[AdsorbateSpec]) -> CoverageResult: ...


def coverage(species: Sequence[AdsorbateSpec]) -> CoverageResult:
    """Equilibrium coverage of each species plus the vacant-site fraction."""
    names = [s.name for s in species]
    if len(set(names)) != len(names):
        raise InvalidInputError(f"duplicate species names: {names}")
    loadings = [s.loading for s in species]
    if not all(math.isfinite(x) for x in loadings):
        raise InvalidInputError("K*P overflowed to a non-finite value")
    denom = 1.0 + math.fsum(loadings)
    return CoverageResult(
        coverages={s.name: x / denom for s, x in zip(species, loadings)},
        vacant=1.0 / denom,
    )


def peak_pressure(equilibrium_constant: float, other_loading: float = 0.0) -> float:
    """Pressure maximising theta_self * theta_other for a co-adsorbed pair.

    theta_a * theta_b = K P c / (1 + K P + c)^2 with c the (fixed) loading of
    the partner species; the maximum sits at K P = 1 + c.
    """
    if equilibrium_constant <= 0:
        raise InvalidInputError("equilibrium_constant must be > 0")
    return (1.0 + other_loading) / equilibrium_constant
