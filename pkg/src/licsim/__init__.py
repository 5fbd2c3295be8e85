"""Simulation and data reduction for laser-induced contamination growth."""

from licsim.adsorption import AdsorbateSpec, CoverageResult, coverage
from licsim.analysis import RegimeReport, Thresholds, classify_sweep, delta_at, fit_onset
from licsim.curves import GrowthCurve
from licsim.kinetics import (
    PRESETS,
    SUPP_HEURISTIC,
    Environment,
    KineticParams,
    LicState,
    RateBreakdown,
    rates,
    simulate,
    step,
)
from licsim.volumetry import Calibration, DepositDims, estimate_volume, rescale_ratio

__version__ = "0.1.0"
