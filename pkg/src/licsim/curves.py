"""Growth-curve container and the CSV table helpers every module writes through.

All CSV output is UTF-8, comma separated, '.' decimal point, floats written
with ``repr`` so a read/write round trip is exact.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from licsim.errors import InvalidInputError, MalformedDataError

KINDS = ("fluorescence", "volume")


@dataclass
class GrowthCurve:
    t: np.ndarray  # s
    values: np.ndarray  # Mcts/s or volume units
    kind: str = "fluorescence"
    P_O2: float | None = None  # mbar
    laser_power: float | None = None  # mW
    pillar_id: str | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.t.ndim != 1 or self.t.shape != self.values.shape:
            raise InvalidInputError("t and values must be 1-D arrays of equal length")
        if self.kind not in KINDS:
            raise InvalidInputError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not np.all(np.isfinite(self.t)) or not np.all(np.isfinite(self.values)):
            raise InvalidInputError("curve contains non-finite samples")
        if np.any(np.diff(self.t) <= 0):
            raise InvalidInputError("sample times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    def meta(self) -> dict:
        return {"kind": self.kind, "P_O2": self.P_O2, "laser_power": self.laser_power,
                "pillar_id": self.pillar_id}

    def with_values(self, values) -> "GrowthCurve":
        return GrowthCurve(self.t.copy(), values, self.kind, self.P_O2, self.laser_power, self.pillar_id)

    def with_times(self, t) -> "GrowthCurve":
        return GrowthCurve(t, self.values.copy(), self.kind, self.P_O2, self.laser_power, self.pillar_id)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_table(path: str | Path | None, header: Sequence[str],
                rows: Iterable[Sequence]) -> str:
    """Write rows as CSV; returns the text. ``path=None`` only renders."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_table(path: str | Path, required: Sequence[str]) -> list[Mapping[str, str]]:
    """Read a CSV with header; raises naming the file when columns are missing."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise MalformedDataError(f"{path}: missing column(s) {missing}")
        return list(reader)


def parse_float(text: str, where: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise MalformedDataError(f"{where}: cannot parse number {text!r}") from None
    if not math.isfinite(value):
        raise MalformedDataError(f"{where}: non-finite value {text!r}")
    return value


CURVE_COLUMNS = {"fluorescence": "fluorescence_Mcts_s", "volume": "volume"}


def write_curve(path: str | Path | None, curve: GrowthCurve) -> str:
    return write_table(path, ["t_s", CURVE_COLUMNS[curve.kind]], zip(curve.t, curve.values))


def read_curve(path: str | Path, kind: str = "fluorescence", **meta) -> GrowthCurve:
    column = CURVE_COLUMNS[kind]
    rows = read_table(path, ["t_s", column])
    t = [parse_float(r["t_s"], f"{path}:{i + 2}") for i, r in enumerate(rows)]
    v = [parse_float(r[column], f"{path}:{i + 2}") for i, r in enumerate(rows)]
    return GrowthCurve(np.array(t), np.array(v), kind=kind, **meta)
