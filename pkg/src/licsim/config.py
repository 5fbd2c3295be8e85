"""Loading of parameter sets, environments and run configs from JSON.

Parameter file schema (all keys optional except when no ``base`` is given)::

    {"base": "supp-heuristic", "k_A": 1e8, "k_B_prime": 1e-3, "k_C": 5e-4,
     "K_O2": 217.39, "K_M": 1.0, "P_M": 1e-10, "N_laser": 30, "intensity_factor": 1.0}

``--params`` accepts a preset name, a path, or a bare name looked up as
``$LICSIM_CONFIG_DIR/<name>.json``.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from licsim.curves import GrowthCurve, read_curve
from licsim.errors import InvalidInputError, MalformedDataError
from licsim.kinetics import PRESETS, Environment, KineticParams

CONFIG_DIR_ENV = "LICSIM_CONFIG_DIR"


def load_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"config file not found: {path}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise MalformedDataError(f"{path}: top level must be a JSON object")
    return data


def resolve_path(ref: str) -> Path:
    """A literal path if it exists, else a lookup in the config directory."""
    p = Path(ref)
    if p.exists():
        return p
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if config_dir:
        for candidate in (Path(config_dir) / ref, Path(config_dir) / f"{ref}.json"):
            if candidate.exists():
                return candidate
    raise FileNotFoundError(f"no such file or preset: {ref!r}")


def params_from_dict(data: dict) -> KineticParams:
    data = dict(data)
    base_name = data.pop("base", None)
    if base_name is None:
        return KineticParams.from_dict(data)
    if base_name not in PRESETS:
        raise InvalidInputError(f"unknown preset {base_name!r}; known: {sorted(PRESETS)}")
    return KineticParams.from_dict({**PRESETS[base_name].to_dict(), **data})


def load_params(ref: str) -> KineticParams:
    if ref in PRESETS:
        return PRESETS[ref]
    data = load_json(resolve_path(ref))
    if "params" in data and isinstance(data["params"], dict):
        data = data["params"]
    return params_from_dict(data)


def load_environment(ref: str) -> Environment:
    data = load_json(resolve_path(ref))
    if "environment" in data:
        data = data["environment"]
    try:
        return Environment.from_dict(data)
    except KeyError as exc:
        raise InvalidInputError(f"{ref}: missing key {exc}") from None


def read_curve_with_sidecar(path: str | Path, kind: str = "fluorescence") -> GrowthCurve:
    """Curve CSV plus ``.json`` sidecar carrying P_O2_mbar / laser_power_mW / pillar_id."""
    path = Path(path)
    sidecar = path.with_suffix(".json")
    meta = load_json(sidecar) if sidecar.exists() else {}
    if "P_O2_mbar" not in meta:
        raise MalformedDataError(f"{path}: sidecar {sidecar} missing P_O2_mbar")
    curve = read_curve(path, kind=kind, P_O2=float(meta["P_O2_mbar"]),
                       laser_power=float(meta.get("laser_power_mW", 1.48)),
                       pillar_id=str(meta.get("pillar_id", path.stem)))
    return curve


def log_range(lo: float, hi: float, n: int) -> np.ndarray:
    if not (0 < lo < hi) or n < 1:
        raise InvalidInputError(f"log range needs 0 < lo < hi and n >= 1, got ({lo}, {hi}, {n})")
    return np.logspace(np.log10(lo), np.log10(hi), int(n))
