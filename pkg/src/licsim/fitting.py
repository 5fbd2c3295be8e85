"""Estimate kinetic parameters from measured growth curves.

Search runs in log10 space: a Latin-hypercube scan of the bounded box,
then Nelder-Mead refinement from the best scan point. The loss is the sum
of squared residuals at marker times, so it does not depend on how densely
the raw curves were sampled.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from licsim.curves import GrowthCurve, write_table
from licsim.errors import (DegenerateModelError, InfeasibleSpecError, InsufficientDataError,
                           InvalidInputError)
from licsim.kinetics import (DEFAULT_DT, PRESETS, Environment, KineticParams, LicState,
                             simulate)
from licsim.pipeline import MARKER_SPACING
from licsim.volumetry import Readout

FITTABLE = ("k_A", "k_B_prime", "k_C", "K_O2", "K_M", "P_M", "N_laser")


@dataclass
class FitSpec:
    free: dict[str, tuple[float, float]]  # name -> (lower, upper), searched log-uniformly
    base: KineticParams  # values of everything not free
    rho: float = 100.0  # K_O2 >= rho * K_M
    grid_points: int = 200
    max_iter: int = 200
    seed: int = 0
    normalize_per_curve: bool = False
    dt: float = DEFAULT_DT
    marker_spacing: float = MARKER_SPACING
    readout: Readout = field(default_factory=Readout)

    def __post_init__(self):
        if not self.free:
            raise InvalidInputError("no free parameters")
        for name, (lo, hi) in self.free.items():
            if name not in FITTABLE:
                raise InvalidInputError(f"{name!r} is not a fittable parameter; choose from {FITTABLE}")
            if not (math.isfinite(lo) and math.isfinite(hi) and 0 < lo < hi):
                raise InvalidInputError(f"bounds for {name} must satisfy 0 < lower < upper, got {(lo, hi)}")
        if self.rho <= 0:
            raise InvalidInputError("rho must be > 0")
        if self.grid_points < 1 or self.max_iter < 0:
            raise InvalidInputError("grid_points must be >= 1 and max_iter >= 0")
        self._check_feasible()

    @property
    def names(self) -> list[str]:
        return list(self.free)

    @property
    def log_bounds(self) -> np.ndarray:
        return np.log10(np.array([self.free[n] for n in self.names], dtype=float))

    def _range(self, name: str) -> tuple[float, float]:
        if name in self.free:
            return self.free[name]
        v = getattr(self.base, name)
        return v, v

    def _check_feasible(self) -> None:
        ko_hi = self._range("K_O2")[1]
        km_lo = self._range("K_M")[0]
        if ko_hi < self.rho * km_lo:
            raise InfeasibleSpecError(
                f"K_O2 <= {ko_hi:g} cannot reach rho * K_M >= {self.rho * km_lo:g}")

    def params_at(self, x_log: np.ndarray) -> KineticParams:
        return self.base.replace(**{n: float(10.0 ** v) for n, v in zip(self.names, x_log)})

    def feasible(self, p: KineticParams) -> bool:
        if p.K_O2 < self.rho * p.K_M:
            return False
        for name, (lo, hi) in self.free.items():
            v = getattr(p, name)
            # tolerate round-off from the log10 round trip
            if v < lo * (1 - 1e-12) or v > hi * (1 + 1e-12):
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "free": {k: list(v) for k, v in self.free.items()},
            "base": self.base.to_dict(),
            "constraints": {"rho": self.rho},
            "grid_points": self.grid_points,
            "max_iter": self.max_iter,
            "seed": self.seed,
            "normalize_per_curve": self.normalize_per_curve,
            "dt": self.dt,
            "marker_spacing": self.marker_spacing,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FitSpec":
        base = data.get("base", "supp-heuristic")
        if isinstance(base, str):
            if base not in PRESETS:
                raise InvalidInputError(f"unknown parameter preset {base!r}")
            base = PRESETS[base]
        else:
            base = KineticParams.from_dict(base)
        if data.get("fixed"):
            base = base.replace(**{k: float(v) for k, v in data["fixed"].items()})
        free = {k: (float(v[0]), float(v[1])) for k, v in data.get("free", {}).items()}
        return cls(
            free=free,
            base=base,
            rho=float(data.get("constraints", {}).get("rho", 100.0)),
            grid_points=int(data.get("grid_points", 200)),
            max_iter=int(data.get("max_iter", 200)),
            seed=int(data.get("seed", 0)),
            normalize_per_curve=bool(data.get("normalize_per_curve", False)),
            dt=float(data.get("dt", DEFAULT_DT)),
            marker_spacing=float(data.get("marker_spacing", MARKER_SPACING)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "FitSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class Target:
    """One curve reduced to baseline-subtracted values at marker times."""

    t: np.ndarray  # s since the start of illumination
    values: np.ndarray
    P_O2: float
    laser_power: float
    kind: str
    weight: float = 1.0


def marker_target(curve: GrowthCurve, spacing: float, normalize: bool) -> Target:
    if curve.P_O2 is None:
        raise InvalidInputError(f"curve {curve.pillar_id!r} has no P_O2")
    start = curve.t[0]
    n = int(math.floor((curve.t[-1] - start) / spacing + 1e-9)) + 1
    if n < 2:
        raise InsufficientDataError(f"curve {curve.pillar_id!r} spans less than one marker interval")
    t = start + spacing * np.arange(n)
    v = np.interp(t, curve.t, curve.values)
    v = v - v[0]
    weight = 1.0
    if normalize:
        scale = float(np.max(np.abs(v)))
        weight = 1.0 / (n * scale * scale) if scale > 0 else 1.0 / n
    return Target(t - start, v, float(curve.P_O2), curve.laser_power or 1.48, curve.kind, weight)


def predict(params: KineticParams, target: Target, dt: float, readout: Readout) -> np.ndarray:
    """Model increase at the target's marker times from a fresh surface."""
    env = Environment(P_O2=target.P_O2, laser_power=target.laser_power)
    traj = simulate(params, env, LicState.fresh(params), float(target.t[-1]), dt)
    dv = np.interp(target.t, traj.t, traj.volume) - traj.volume[0]
    if target.kind == "fluorescence":
        return readout.fluorescence(dv, target.laser_power)
    return dv


class Objective:
    """Picklable loss over log10 parameters; infeasible points cost inf."""

    def __init__(self, spec: FitSpec, targets: Sequence[Target]):
        self.spec = spec
        self.targets = list(targets)

    def residuals(self, params: KineticParams) -> list[np.ndarray]:
        return [predict(params, tg, self.spec.dt, self.spec.readout) - tg.values for tg in self.targets]

    def loss_of(self, params: KineticParams) -> float:
        total = 0.0
        for tg, r in zip(self.targets, self.residuals(params)):
            total += tg.weight * float(r @ r)
        return total if math.isfinite(total) else math.inf

    def __call__(self, x_log) -> float:
        try:
            p = self.spec.params_at(np.asarray(x_log, dtype=float))
        except InvalidInputError:
            return math.inf
        if not self.spec.feasible(p):
            return math.inf
        return self.loss_of(p)


@dataclass
class FitResult:
    params: KineticParams
    loss: float
    residuals: list[np.ndarray]
    residual_times: list[np.ndarray]
    pressures: list[float]
    trace: list[dict]
    grid_loss: float
    n_evaluations: int

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "loss": self.loss,
            "grid_loss": self.grid_loss,
            "n_evaluations": self.n_evaluations,
            "per_curve_ssr": [float(r @ r) for r in self.residuals],
            "trace": self.trace,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def residual_table(self, path: str | Path | None = None) -> str:
        rows = []
        for i, (p, t, r) in enumerate(zip(self.pressures, self.residual_times, self.residuals)):
            rows.extend([i, p, ti, ri] for ti, ri in zip(t, r))
        return write_table(path, ["curve", "P_O2", "t_s", "residual"], rows)


def _scan(objective: Objective, points: np.ndarray, workers: int | None) -> np.ndarray:
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(objective, points, chunksize=8)))
    return np.array([objective(x) for x in points])


def fit(curves: Sequence[GrowthCurve], spec: FitSpec, workers: int | None = None) -> FitResult:
    """Two-stage bounded search; deterministic for a given ``spec.seed``."""
    if not curves:
        raise InsufficientDataError("no curves to fit")
    targets = [marker_target(c, spec.marker_spacing, spec.normalize_per_curve) for c in curves]
    objective = Objective(spec, targets)
    bounds = spec.log_bounds
    names = spec.names

    sampler = qmc.LatinHypercube(d=len(names), seed=np.random.default_rng(spec.seed))
    grid = qmc.scale(sampler.random(spec.grid_points), bounds[:, 0], bounds[:, 1])
    losses = _scan(objective, grid, workers)
    finite = np.isfinite(losses)
    if not finite.any():
        raise DegenerateModelError("every grid point gave a non-finite or infeasible loss")
    # argmin, ties to the lexicographically smaller parameter vector
    order = np.lexsort(tuple(grid[:, j] for j in reversed(range(grid.shape[1]))) + (losses,))
    x_grid, loss_grid = grid[order[0]], float(losses[order[0]])
    trace = [{"stage": "grid", "loss": loss_grid,
              "params": dict(zip(names, (10.0 ** x_grid).tolist()))}]

    x_best, loss_best, n_eval = x_grid, loss_grid, len(grid)
    if spec.max_iter > 0:
        iterates = []
        res = minimize(objective, x_grid, method="Nelder-Mead",
                       bounds=list(map(tuple, bounds)),
                       callback=lambda xk: iterates.append(np.array(xk)),
                       options={"maxiter": spec.max_iter, "xatol": 1e-12, "fatol": 0.0,
                                "adaptive": len(names) > 2})
        n_eval += int(res.nfev)
        for k, xk in enumerate(iterates[:: max(1, len(iterates) // 20)]):
            trace.append({"stage": "simplex", "iteration": k, "params": dict(zip(names, (10.0 ** xk).tolist()))})
        if np.isfinite(res.fun) and res.fun < loss_best:
            x_best, loss_best = np.asarray(res.x, dtype=float), float(res.fun)
    trace.append({"stage": "final", "loss": loss_best,
                  "params": dict(zip(names, (10.0 ** x_best).tolist()))})

    best = spec.params_at(x_best)
    return FitResult(
        params=best,
        loss=loss_best,
        residuals=objective.residuals(best),
        residual_times=[tg.t for tg in targets],
        pressures=[tg.P_O2 for tg in targets],
        trace=trace,
        grid_loss=loss_grid,
        n_evaluations=n_eval,
    )


def sweep_predict(params: KineticParams, pressures: Sequence[float], t_ref: float,
                  dt: float = DEFAULT_DT, initial_volume: float = 0.0) -> list[tuple[float, float]]:
    """Volume increase at ``t_ref`` for each pressure (fresh surface each time)."""
    ps = np.asarray(pressures, dtype=float)
    if ps.size == 0:
        raise InvalidInputError("no pressures given")
    if np.any(ps <= 0) or not np.all(np.isfinite(ps)):
        raise InvalidInputError("pressures must be positive and finite")
    if np.any(np.diff(ps) < 0):
        raise InvalidInputError("pressures must be sorted ascending")
    out = []
    for p in ps:
        traj = simulate(params, Environment(P_O2=float(p)), LicState.fresh(params, initial_volume), t_ref, dt)
        out.append((float(p), float(traj.volume[-1] - traj.volume[0])))
    return out
