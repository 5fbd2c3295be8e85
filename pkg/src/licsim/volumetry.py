"""Deposit volume estimates and the volume <-> fluorescence calibration."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from licsim.errors import InvalidInputError, SingularFitError

FWHM_PER_SIGMA = 2.355
DIMENSION_REL_UNCERTAINTY = 0.10
SEM_VOLUME_FLOOR_UM3 = 0.003  # smallest volume resolvable in the SEM images


@dataclass(frozen=True)
class DepositDims:
    h: float  # um
    w: float  # um
    d: float  # um

    def __post_init__(self):
        for name in ("h", "w", "d"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidInputError(f"dimension {name} must be finite and >= 0, got {value!r}")

    @property
    def base(self) -> float:
        return 0.5 * (self.w + self.d)


@dataclass(frozen=True)
class VolumeEstimate:
    spherical_cap: float
    cylinder: float
    gaussian: float
    mean: float
    spread: float
    dimension_uncertainty: float  # first-order propagation of +-10% per dimension

    @property
    def primary(self) -> float:
        return self.spherical_cap


def spherical_cap_volume(dims: DepositDims) -> float:
    ell = dims.base
    return math.pi / 6.0 * dims.h ** 3 + math.pi / 8.0 * ell ** 2 * dims.h


def cylinder_volume(dims: DepositDims) -> float:
    return math.pi * dims.base ** 2 * dims.h


def gaussian_volume(dims: DepositDims) -> float:
    # w and d taken as full widths at half maximum
    return 2.0 * math.pi * dims.h * dims.w * dims.d / (2.0 * FWHM_PER_SIGMA)


def estimate_volume(dims: DepositDims,
                    rel_uncertainty: float = DIMENSION_REL_UNCERTAINTY) -> VolumeEstimate:
    cap, cyl, gauss = spherical_cap_volume(dims), cylinder_volume(dims), gaussian_volume(dims)
    values = np.array([cap, cyl, gauss])
    return VolumeEstimate(
        spherical_cap=cap,
        cylinder=cyl,
        gaussian=gauss,
        mean=float(values.mean()),
        spread=float(values.std(ddof=1)),
        dimension_uncertainty=3.0 * rel_uncertainty * cap,
    )


@dataclass(frozen=True)
class Calibration:
    ratio: float  # um^3 s / Mcts
    reference_power: float  # mW
    intercept: float = 0.0  # um^3, reported only; conversions assume zero
    n_points: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.ratio) and self.ratio > 0):
            raise InvalidInputError(f"calibration ratio must be > 0, got {self.ratio!r}")
        if not (math.isfinite(self.reference_power) and self.reference_power > 0):
            raise InvalidInputError(f"reference_power must be > 0, got {self.reference_power!r}")

    def to_dict(self) -> dict:
        return {
            "ratio_um3_s_per_Mcts": self.ratio,
            "reference_power_mW": self.reference_power,
            "intercept_um3": self.intercept,
            "n_points": self.n_points,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Calibration":
        return cls(
            ratio=float(data["ratio_um3_s_per_Mcts"]),
            reference_power=float(data["reference_power_mW"]),
            intercept=float(data.get("intercept_um3", 0.0)),
            n_points=int(data.get("n_points", 0)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Calibration":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# SEM-based ratio measured at the 92 uW probe power.
REFERENCE_CALIBRATION = Calibration(ratio=9.3e-3, reference_power=0.092)


def fit_calibration(points: Sequence[tuple[float, float]], power: float) -> Calibration:
    """Ordinary least-squares line volume = ratio * fluorescence + intercept."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise InvalidInputError("need at least two (fluorescence, volume) points")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("calibration points must be finite")
    x, y = pts[:, 0], pts[:, 1]
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx <= 1e-300 or np.ptp(x) == 0:
        raise SingularFitError("all fluorescence values are equal; slope undefined")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    if slope <= 0:
        raise SingularFitError(f"fitted slope {slope:g} is not positive")
    return Calibration(ratio=slope, reference_power=power, intercept=intercept, n_points=len(pts))


def fit_residuals(points: Sequence[tuple[float, float]], cal: Calibration) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return pts[:, 1] - (cal.ratio * pts[:, 0] + cal.intercept)


def rescale_ratio(cal: Calibration, target_power: float) -> Calibration:
    """Ratio at another excitation power; fluorescence scales with power."""
    if not (math.isfinite(target_power) and target_power > 0):
        raise InvalidInputError(f"target_power must be > 0, got {target_power!r}")
    if target_power == cal.reference_power:
        return cal
    return Calibration(ratio=cal.ratio * cal.reference_power / target_power,
                       reference_power=target_power,
                       intercept=cal.intercept, n_points=cal.n_points)


def volume_to_fluorescence(volume, cal: Calibration, power: float):
    return volume / rescale_ratio(cal, power).ratio


def fluorescence_to_volume(fluorescence, cal: Calibration, power: float):
    return fluorescence * rescale_ratio(cal, power).ratio


@dataclass(frozen=True)
class Readout:
    """Maps model volume units to um^3 and then to fluorescence.

    The default unit volume makes one model unit read as 1 kcts/s at
    1.48 mW with the reference calibration.
    """

    calibration: Calibration = REFERENCE_CALIBRATION
    unit_volume_um3: float = 9.3e-3 * 0.092 / 1.48 * 1e-3

    def fluorescence(self, volume_units, power: float):
        return volume_to_fluorescence(np.asarray(volume_units) * self.unit_volume_um3,
                                      self.calibration, power)

    def volume_units(self, fluorescence, power: float):
        return fluorescence_to_volume(np.asarray(fluorescence), self.calibration, power) / self.unit_volume_um3
