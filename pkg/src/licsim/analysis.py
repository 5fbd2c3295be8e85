"""Onset/rate extraction and regime labelling of growth curves.

Regime thresholds are heuristic: the regime boundaries were read off plots,
never defined numerically, so everything tunable lives in ``Thresholds``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from licsim.curves import GrowthCurve, write_table
from licsim.errors import InsufficientDataError, InvalidInputError, OutOfRangeError

REFERENCE_TIME = 200 * 60.0  # s
REGIMES = ("I", "II", "III")


@dataclass(frozen=True)
class OnsetFit:
    onset_time: float
    post_onset_rate: float
    residual: float
    baseline: float
    no_growth: bool = False


def _hinge_design(t: np.ndarray, t0: float) -> np.ndarray:
    return np.column_stack([np.ones_like(t), np.maximum(0.0, t - t0)])


def fit_onset(curve: GrowthCurve, min_samples: int = 4) -> OnsetFit:
    """Least-squares hinge ``b + m * max(0, t - t0)`` with t0 on the sample grid.

    Each candidate t0 gets a linear refit of (b, m); the smallest residual
    wins and near-ties go to the earliest t0.
    """
    t, y = curve.t, curve.values
    if len(t) < min_samples:
        raise InsufficientDataError(f"hinge fit needs >= {min_samples} samples, got {len(t)}")
    # shift/scale for conditioning only; results mapped back below
    t_scale = float(t[-1] - t[0])
    ts = (t - t[0]) / t_scale
    residuals = np.empty(len(t) - 1)
    coefs = np.empty((len(t) - 1, 2))
    for i, t0 in enumerate(ts[:-1]):
        X = _hinge_design(ts, t0)
        c, *_ = np.linalg.lstsq(X, y, rcond=None)
        r = y - X @ c
        residuals[i] = float(r @ r)
        coefs[i] = c
    scale = float(np.sum((y - y.mean()) ** 2)) + float(np.sum(y ** 2)) * 1e-30
    tie_tol = 1e-10 * scale + 1e-300
    best = int(np.flatnonzero(residuals <= residuals.min() + tie_tol)[0])
    baseline, slope = coefs[best]
    rate = float(slope) / t_scale
    no_growth = abs(rate) * t_scale <= 1e-12 * max(1.0, float(np.max(np.abs(y))))
    if no_growth:
        rate = 0.0
    return OnsetFit(
        onset_time=float(t[best]) if not no_growth else float(t[0]),
        post_onset_rate=rate,
        residual=float(residuals[best]),
        baseline=float(baseline),
        no_growth=bool(no_growth),
    )


def delta_at(curve: GrowthCurve, t_ref: float) -> float:
    """Interpolated value at ``t_ref`` minus the first sample; no extrapolation."""
    t = curve.t
    if not (t[0] <= t_ref <= t[-1]):
        raise OutOfRangeError(f"t_ref={t_ref} outside sampled range [{t[0]}, {t[-1]}]")
    return float(np.interp(t_ref, t, curve.values) - curve.values[0])


@dataclass(frozen=True)
class RegimeReport:
    onset_time: float  # s
    post_onset_rate: float  # value units / s
    delta_at_reference: float
    regime: str | None = None
    reference_time: float = REFERENCE_TIME
    no_growth: bool = False
    fit_residual: float = 0.0

    def with_regime(self, regime: str) -> "RegimeReport":
        return RegimeReport(self.onset_time, self.post_onset_rate, self.delta_at_reference,
                            regime, self.reference_time, self.no_growth, self.fit_residual)


def report(curve: GrowthCurve, t_ref: float = REFERENCE_TIME) -> RegimeReport:
    """Onset fit plus reference-time increase for one curve (regime left unset)."""
    fit = fit_onset(curve)
    return RegimeReport(
        onset_time=fit.onset_time,
        post_onset_rate=fit.post_onset_rate,
        delta_at_reference=delta_at(curve, t_ref),
        reference_time=t_ref,
        no_growth=fit.no_growth,
        fit_residual=fit.residual,
    )


@dataclass(frozen=True)
class Thresholds:
    onset_threshold: float = 20 * 60.0  # s; longer onsets count as delayed
    rate_tolerance: float = 0.30  # fraction of the sweep's largest post-onset rate
    etch_threshold: float = 0.0  # absolute value units
    etch_noise_fraction: float = 0.10  # of the sweep's largest |delta|

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Thresholds":
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass
class SweepClassification:
    pressures: np.ndarray
    reports: list[RegimeReport]
    peak_pressure: float
    effective_etch_threshold: float
    rate_within_tolerance: list[bool] = field(default_factory=list)

    @property
    def labels(self) -> list[str]:
        return [r.regime for r in self.reports]

    def runs(self, regime: str) -> list[list[int]]:
        """Index runs of consecutive points carrying ``regime``."""
        out, cur = [], []
        for i, label in enumerate(self.labels):
            if label == regime:
                cur.append(i)
            elif cur:
                out.append(cur)
                cur = []
        if cur:
            out.append(cur)
        return out


def classify_sweep(points: Sequence[tuple[float, RegimeReport]],
                   thresholds: Thresholds = Thresholds()) -> SweepClassification:
    """Label each pressure point I, II or III.

    * III: increase at the reference time at or below the etch threshold,
      widened by a noise band relative to the sweep's largest increase.
    * II: above the peak-increase pressure with an onset later than
      ``onset_threshold``.
    * I: everything else (growth from the start, or the rising side of the
      sweep).

    Whether a delayed point's post-onset rate is within ``rate_tolerance``
    of the sweep maximum is reported separately, not used as a gate.
    """
    if len(points) < 3:
        raise InsufficientDataError(f"need >= 3 pressure points, got {len(points)}")
    pressures = np.array([p for p, _ in points], dtype=float)
    if not np.all(np.isfinite(pressures)) or np.any(pressures < 0):
        raise InvalidInputError("pressures must be finite and >= 0")
    order = np.argsort(pressures, kind="stable")
    if np.any(np.diff(pressures[order]) == 0):
        raise InvalidInputError("duplicate pressures in sweep")
    reports = [points[i][1] for i in order]
    pressures = pressures[order]

    deltas = np.array([r.delta_at_reference for r in reports])
    rates = np.array([r.post_onset_rate for r in reports])
    i_peak = int(np.argmax(deltas))
    etch = max(thresholds.etch_threshold,
               thresholds.etch_noise_fraction * float(np.max(np.abs(deltas))))
    max_rate = float(np.max(rates))
    within = [bool(max_rate > 0 and r >= (1 - thresholds.rate_tolerance) * max_rate) for r in rates]

    labelled = []
    for i, rep in enumerate(reports):
        if rep.delta_at_reference <= etch:
            regime = "III"
        elif i > i_peak and rep.onset_time > thresholds.onset_threshold:
            regime = "II"
        else:
            regime = "I"
        labelled.append(rep.with_regime(regime))
    return SweepClassification(pressures, labelled, float(pressures[i_peak]), etch, within)


SUMMARY_HEADER = ["P_O2", "onset_min", "rate", "delta_200min", "regime"]


def summary_rows(classification: SweepClassification, rate_unit_s: float = 60.0):
    """Rows for the CSV summary; rates per minute by default."""
    for p, rep in zip(classification.pressures, classification.reports):
        yield [float(p), rep.onset_time / 60.0, rep.post_onset_rate * rate_unit_s,
               rep.delta_at_reference, rep.regime]


def write_summary(path: str | Path | None, classification: SweepClassification) -> str:
    return write_table(path, SUMMARY_HEADER, summary_rows(classification))


def reports_json(classification: SweepClassification) -> str:
    records = []
    for p, rep, ok in zip(classification.pressures, classification.reports,
                          classification.rate_within_tolerance):
        rec = asdict(rep)
        rec["P_O2"] = float(p)
        rec["rate_within_tolerance"] = ok
        records.append(rec)
    doc = {
        "peak_pressure": classification.peak_pressure,
        "effective_etch_threshold": classification.effective_etch_threshold,
        "points": records,
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"

