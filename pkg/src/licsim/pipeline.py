"""Reduction of raw fluorescence records into averaged growth points.

Raw records are sampled irregularly (roughly every two minutes). Each one is
linearly interpolated onto fixed markers, the first marker value is
subtracted, and curves taken at the same O2 pressure are averaged with a
Student-t 68% confidence interval.

Input format: ``<name>.csv`` with columns ``t_s, fluorescence_Mcts_s`` plus a
``<name>.json`` sidecar holding ``pillar_id``, ``P_O2_mbar`` and
``laser_power_mW``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from licsim.curves import GrowthCurve, write_table
from licsim.errors import (InsufficientDataError, InvalidInputError, MalformedDataError,
                           OutOfRangeError)

MARKER_SPACING = 600.0  # s
CI_LEVEL = math.erf(1 / math.sqrt(2))  # one-sigma coverage, 0.6827


@dataclass
class RawRecord:
    pillar_id: str
    P_O2: float  # mbar
    laser_power: float  # mW
    t: np.ndarray  # s
    counts_rate: np.ndarray  # Mcts/s

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.counts_rate = np.asarray(self.counts_rate, dtype=float)
        if self.t.shape != self.counts_rate.shape or self.t.ndim != 1:
            raise InvalidInputError(f"{self.pillar_id}: times and rates differ in length")
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.counts_rate))):
            raise InvalidInputError(f"{self.pillar_id}: non-finite samples")
        if np.any(np.diff(self.t) < 0):
            raise InvalidInputError(f"{self.pillar_id}: sample times must be nondecreasing")
        if np.any(self.counts_rate < 0):
            raise InvalidInputError(f"{self.pillar_id}: negative count rate")


@dataclass
class ReducedCurve:
    marker_times: np.ndarray  # s
    values: np.ndarray  # baseline-subtracted Mcts/s
    pillar_id: str | None = None
    P_O2: float | None = None
    laser_power: float | None = None

    def value_at(self, t_ref: float) -> float:
        if not (self.marker_times[0] <= t_ref <= self.marker_times[-1]):
            raise OutOfRangeError(f"{self.pillar_id}: t_ref={t_ref} not covered "
                                  f"[{self.marker_times[0]}, {self.marker_times[-1]}]")
        return float(np.interp(t_ref, self.marker_times, self.values))

    def to_curve(self) -> GrowthCurve:
        return GrowthCurve(self.marker_times, self.values, kind="fluorescence",
                           P_O2=self.P_O2, laser_power=self.laser_power, pillar_id=self.pillar_id)


def _collapse_duplicate_times(t: np.ndarray, y: np.ndarray):
    # repeated timestamps are averaged so interpolation sees a function
    uniq, inverse = np.unique(t, return_inverse=True)
    if len(uniq) == len(t):
        return t, y
    sums = np.bincount(inverse, weights=y)
    counts = np.bincount(inverse)
    return uniq, sums / counts


def interpolate_markers(record: RawRecord, marker_spacing: float = MARKER_SPACING,
                        start: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Linear interpolation of the raw record at ``start + k * spacing``.

    ``start`` defaults to the first marker multiple at or after the first
    sample; markers stop at the last one not beyond the final sample.
    """
    if not marker_spacing > 0:
        raise InvalidInputError(f"marker_spacing must be > 0, got {marker_spacing!r}")
    if len(record.t) < 2:
        raise InsufficientDataError(f"{record.pillar_id}: need >= 2 samples, got {len(record.t)}")
    t, y = _collapse_duplicate_times(record.t, record.counts_rate)
    if len(t) < 2:
        raise InsufficientDataError(f"{record.pillar_id}: need >= 2 distinct sample times")
    if start is None:
        start = math.ceil(t[0] / marker_spacing - 1e-9) * marker_spacing
    if start < t[0]:
        raise OutOfRangeError(f"{record.pillar_id}: first marker {start} precedes the data")
    n = int(math.floor((t[-1] - start) / marker_spacing + 1e-9)) + 1
    markers = start + marker_spacing * np.arange(max(n, 0))
    return markers, np.interp(markers, t, y)


def reduce(record: RawRecord, marker_spacing: float = MARKER_SPACING,
           start: float | None = None) -> ReducedCurve:
    """Markers from ``interpolate_markers`` with the first value subtracted."""
    markers, values = interpolate_markers(record, marker_spacing, start)
    if len(markers) < 2:
        raise InsufficientDataError(f"{record.pillar_id}: samples span less than one marker interval")
    return ReducedCurve(markers, values - values[0], record.pillar_id, record.P_O2, record.laser_power)


@dataclass(frozen=True)
class AveragedPoint:
    P_O2: float | None
    n: int
    mean: float  # Mcts/s
    ci68_halfwidth: float  # nan when n == 1
    t_ref: float = 0.0

    @property
    def ci_defined(self) -> bool:
        return self.n >= 2


def t_critical(df: int, level: float = CI_LEVEL) -> float:
    """Two-sided critical value of Student's t for a central ``level`` interval."""
    return float(stats.t.ppf(0.5 + level / 2.0, df))


def average_at(curves: Sequence[ReducedCurve], t_ref: float, level: float = CI_LEVEL) -> AveragedPoint:
    if not curves:
        raise InsufficientDataError("no curves to average")
    pressures = {c.P_O2 for c in curves}
    if len(pressures) > 1:
        raise InvalidInputError(f"curves span several pressures: {sorted(p for p in pressures if p is not None)}")
    vals = np.array([c.value_at(t_ref) for c in curves])
    n = len(vals)
    mean = float(vals.mean())
    if n == 1:
        half = math.nan
    else:
        sem = float(vals.std(ddof=1)) / math.sqrt(n)
        half = t_critical(n - 1, level) * sem
    return AveragedPoint(P_O2=curves[0].P_O2, n=n, mean=mean, ci68_halfwidth=half, t_ref=t_ref)


def average_by_pressure(curves: Sequence[ReducedCurve], t_ref: float) -> list[AveragedPoint]:
    """Group curves by pressure (ascending) and average each group."""
    groups: dict[float, list[ReducedCurve]] = {}
    for c in curves:
        groups.setdefault(c.P_O2, []).append(c)
    return [average_at(groups[p], t_ref) for p in sorted(groups)]


def moving_average(samples, window: int) -> np.ndarray:
    """Centred moving mean; near the ends the window is truncated to the data."""
    if int(window) != window or window < 1 or window % 2 == 0:
        raise InvalidInputError(f"window must be a positive odd integer, got {window!r}")
    y = np.asarray(samples, dtype=float)
    half = int(window) // 2
    n = len(y)
    return np.array([y[max(i - half, 0):min(i + half + 1, n)].mean() for i in range(n)])


# ---- file formats -------------------------------------------------------

RAW_COLUMNS = ("t_s", "fluorescence_Mcts_s")
REDUCED_HEADER = ["t_s", "fluorescence_Mcts_s"]
AVERAGED_HEADER = ["P_O2_mbar", "n", "mean_delta_Mcts_s", "ci68_halfwidth_Mcts_s", "t_ref_s"]


def read_raw_record(csv_path: str | Path, sidecar: str | Path | None = None) -> RawRecord:
    """Load a raw CSV plus JSON sidecar; errors name the offending line."""
    csv_path = Path(csv_path)
    sidecar = Path(sidecar) if sidecar else csv_path.with_suffix(".json")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise MalformedDataError(f"{csv_path}: missing metadata sidecar {sidecar}") from None
    except json.JSONDecodeError as exc:
        raise MalformedDataError(f"{sidecar}: invalid JSON ({exc})") from None
    for key in ("P_O2_mbar", "laser_power_mW"):
        if key not in meta:
            raise MalformedDataError(f"{sidecar}: missing key {key!r}")

    t, f = [], []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != list(RAW_COLUMNS):
            raise MalformedDataError(f"{csv_path}:1: expected header {','.join(RAW_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise MalformedDataError(f"{csv_path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                ti, fi = float(row[0]), float(row[1])
            except ValueError:
                raise MalformedDataError(f"{csv_path}:{lineno}: malformed row {row!r}") from None
            if not (math.isfinite(ti) and math.isfinite(fi)):
                raise MalformedDataError(f"{csv_path}:{lineno}: non-finite value")
            t.append(ti)
            f.append(fi)
    return RawRecord(
        pillar_id=str(meta.get("pillar_id", csv_path.stem)),
        P_O2=float(meta["P_O2_mbar"]),
        laser_power=float(meta["laser_power_mW"]),
        t=np.array(t),
        counts_rate=np.array(f),
    )


def write_reduced(path: str | Path | None, curve: ReducedCurve) -> str:
    return write_table(path, REDUCED_HEADER, zip(curve.marker_times, curve.values))


def write_averaged(path: str | Path | None, points: Sequence[AveragedPoint]) -> str:
    return write_table(path, AVERAGED_HEADER,
                       ([p.P_O2, p.n, p.mean, p.ci68_halfwidth, p.t_ref] for p in points))
