"""Exact stochastic simulation (Gillespie SSA) of the three reactions.

One event moves one site-volume unit:

    A: volume += 1, free_sites -= 1
    B: volume += 1
    C: volume -= 1, free_sites += 1 (never above the initial count)

Coverages are quasi-static, so propensities use the same adsorbate product
as the deterministic model. Used as a small-system check on the
deterministic integrator.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from licsim.curves import GrowthCurve, write_table
from licsim.errors import InvalidInputError
from licsim.kinetics import Environment, KineticParams, LicState, rate_coefficients

_CHUNK = 4096


@dataclass(frozen=True)
class DiscreteState:
    volume_units: int
    free_sites: int
    time: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.volume_units < 0 or self.free_sites < 0:
            raise InvalidInputError("volume_units and free_sites must be >= 0")

    @classmethod
    def from_state(cls, state: LicState, rng_seed: int = 0) -> "DiscreteState":
        return cls(int(round(state.volume)), int(round(state.surface_sites)), state.time, rng_seed)


@dataclass
class StochasticPath:
    """Event times and the state right after each event (first entry: initial)."""

    t: np.ndarray
    volume: np.ndarray
    free_sites: np.ndarray
    t_end: float

    def sample(self, times) -> tuple[np.ndarray, np.ndarray]:
        """Piecewise-constant (volume, free_sites) at the requested times."""
        idx = np.searchsorted(self.t, np.asarray(times, dtype=float), side="right") - 1
        idx = np.clip(idx, 0, len(self.t) - 1)
        return self.volume[idx].astype(float), self.free_sites[idx].astype(float)

    def volume_curve(self) -> GrowthCurve:
        t, v = self.t, self.volume.astype(float)
        if t[-1] < self.t_end:
            t = np.append(t, self.t_end)
            v = np.append(v, v[-1])
        return GrowthCurve(t, v, kind="volume")

    @property
    def n_events(self) -> int:
        return len(self.t) - 1


def gillespie_run(params: KineticParams, env: Environment, initial: DiscreteState,
                  t_end: float) -> StochasticPath:
    """Direct-method SSA from ``initial.time`` to ``t_end``, seeded by ``initial.rng_seed``.

    Reaching a state with zero total propensity ends the run early; the
    path then stays flat up to ``t_end``.
    """
    if not (math.isfinite(t_end) and t_end > initial.time):
        raise InvalidInputError(f"t_end must exceed the initial time, got {t_end!r}")
    a_coef, b_coef, c_coef = rate_coefficients(params, env)
    if not all(math.isfinite(x) for x in (a_coef, b_coef, c_coef)):
        raise InvalidInputError("non-finite propensity coefficients")
    n_laser = params.N_laser
    rng = np.random.default_rng(initial.rng_seed)

    v, ns, ns_max = initial.volume_units, initial.free_sites, initial.free_sites
    t = initial.time
    times, vols, sites = [t], [v], [ns]
    u = rng.random(2 * _CHUNK)
    k = 0
    while True:
        n_l = min(v ** (2.0 / 3.0), n_laser)
        p_a = a_coef * ns * ns
        p_b = b_coef * n_l
        p_c = c_coef * n_l
        total = p_a + p_b + p_c
        if total <= 0.0:
            break
        if k >= len(u):
            u = rng.random(2 * _CHUNK)
            k = 0
        # 1 - u lies in (0, 1], so the log is finite
        t += -math.log(1.0 - u[k]) / total
        if t > t_end:
            break
        r = u[k + 1] * total
        k += 2
        if r < p_a:
            v += 1
            ns -= 1
        elif r < p_a + p_b:
            v += 1
        else:
            v -= 1
            if ns < ns_max:
                ns += 1
        times.append(t)
        vols.append(v)
        sites.append(ns)
    return StochasticPath(np.array(times), np.array(vols, dtype=np.int64),
                          np.array(sites, dtype=np.int64), t_end)


@dataclass
class EnsembleSummary:
    times: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    n_runs: int
    sites_mean: np.ndarray | None = None

    def standard_error(self) -> np.ndarray:
        return np.sqrt(self.variance / self.n_runs)

    def to_csv(self, path=None) -> str:
        return write_table(path, ["t_s", "volume_mean", "volume_var", "n_runs"],
                           ((t, m, s2, self.n_runs) for t, m, s2 in zip(self.times, self.mean, self.variance)))


def run_seeds(base_seed: int, n_runs: int) -> list[int]:
    """Independent per-run seeds derived from one base seed."""
    children = np.random.SeedSequence(base_seed).spawn(n_runs)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _sample_one(args):
    params, env, initial, t_end, sample_times = args
    path = gillespie_run(params, env, initial, t_end)
    return path.sample(sample_times)


def gillespie_ensemble(params: KineticParams, env: Environment, initial: DiscreteState,
                       t_end: float, n_runs: int, sample_times: Sequence[float],
                       workers: int | None = None) -> EnsembleSummary:
    """Mean and variance of volume over ``n_runs`` independently seeded runs.

    Per-run seeds come from ``initial.rng_seed``; results do not depend on
    ``workers`` or scheduling.
    """
    if n_runs < 1:
        raise InvalidInputError(f"n_runs must be >= 1, got {n_runs}")
    sample_times = np.asarray(sample_times, dtype=float)
    if sample_times.size == 0:
        raise InvalidInputError("sample_times is empty")
    if np.any(sample_times > t_end) or np.any(sample_times < initial.time):
        raise InvalidInputError("sample_times must lie within [initial.time, t_end]")
    jobs = [
        (params, env, DiscreteState(initial.volume_units, initial.free_sites, initial.time, s),
         t_end, sample_times)
        for s in run_seeds(initial.rng_seed, n_runs)
    ]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sample_one, jobs, chunksize=max(1, n_runs // (4 * workers))))
    else:
        results = [_sample_one(j) for j in jobs]
    vols = np.array([r[0] for r in results])
    sites = np.array([r[1] for r in results])
    return EnsembleSummary(
        times=sample_times,
        mean=vols.mean(axis=0),
        variance=vols.var(axis=0),
        n_runs=n_runs,
        sites_mean=sites.mean(axis=0),
    )


@dataclass(frozen=True)
class AgreementReport:
    max_relative_deviation: float
    tolerance: float
    times: np.ndarray
    deterministic: np.ndarray
    stochastic_mean: np.ndarray

    @property
    def passed(self) -> bool:
        return self.max_relative_deviation <= self.tolerance


def compare_with_deterministic(params: KineticParams, env: Environment, initial: LicState,
                               t_end: float, dt: float, n_runs: int, sample_times: Sequence[float],
                               tolerance: float = 0.05, seed: int = 0,
                               workers: int | None = None) -> AgreementReport:
    """Max relative deviation of the SSA ensemble mean from the Euler trajectory."""
    from licsim.kinetics import simulate

    if not tolerance > 0:
        raise InvalidInputError(f"tolerance must be > 0, got {tolerance!r}")
    sample_times = np.asarray(sample_times, dtype=float)
    traj = simulate(params, env, initial, t_end, dt)
    det = np.interp(sample_times, traj.t, traj.volume)
    ens = gillespie_ensemble(params, env, DiscreteState.from_state(initial, seed),
                             t_end, n_runs, sample_times, workers=workers)
    scale = np.maximum(np.abs(det), 1e-12)
    dev = np.abs(ens.mean - det) / scale
    both_zero = (np.abs(det) == 0) & (ens.mean == 0)
    dev[both_zero] = 0.0
    return AgreementReport(float(dev.max()), tolerance, sample_times, det, ens.mean)
