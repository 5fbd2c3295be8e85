import json
import math

import numpy as np
import pytest

from licsim.curves import GrowthCurve
from licsim.errors import InfeasibleSpecError, InsufficientDataError, InvalidInputError
from licsim.fitting import FitSpec, Objective, fit, marker_target, sweep_predict
from licsim.kinetics import SUPP_HEURISTIC, Environment, simulate


def synthetic(params, pressures, t_end=6000.0, kind="fluorescence"):
    out = []
    for p in pressures:
        tr = simulate(params, Environment(P_O2=p), None, t_end, 10.0)
        y = tr.fluorescence if kind == "fluorescence" else tr.volume
        out.append(GrowthCurve(tr.t, y, kind=kind, P_O2=p, laser_power=1.48))
    return out


def test_single_parameter_exact():
    curves = synthetic(SUPP_HEURISTIC, [1e-3, 0.3])
    spec = FitSpec(free={"k_C": (1e-5, 1e-2)}, base=SUPP_HEURISTIC, grid_points=30, seed=3)
    res = fit(curves, spec)
    assert res.params.k_C == pytest.approx(SUPP_HEURISTIC.k_C, rel=1e-6)
    assert res.loss <= res.grid_loss


def test_deterministic_for_seed():
    curves = synthetic(SUPP_HEURISTIC, [1e-3, 0.3], t_end=3000.0)
    spec = FitSpec(free={"k_B_prime": (1e-4, 1e-2), "k_C": (1e-5, 1e-2)}, base=SUPP_HEURISTIC,
                   grid_points=20, max_iter=30, seed=5)
    a, b = fit(curves, spec), fit(curves, spec)
    assert a.params == b.params and a.loss == b.loss


def test_volume_kind_and_residual_table():
    curves = synthetic(SUPP_HEURISTIC, [1e-3], t_end=3000.0, kind="volume")
    spec = FitSpec(free={"k_B_prime": (1e-4, 1e-2)}, base=SUPP_HEURISTIC, grid_points=10, max_iter=60)
    res = fit(curves, spec)
    table = res.residual_table()
    assert table.splitlines()[0] == "curve,P_O2,t_s,residual"
    assert len(table.splitlines()) == 1 + 6
    doc = json.loads(res.to_json())
    assert set(doc) >= {"params", "loss", "trace", "per_curve_ssr"}


def test_infeasible_constraint_rejected_up_front():
    with pytest.raises(InfeasibleSpecError):
        FitSpec(free={"K_O2": (1.0, 50.0)}, base=SUPP_HEURISTIC, rho=100.0)


def test_objective_is_inf_outside_constraint():
    spec = FitSpec(free={"K_O2": (1.0, 1e4)}, base=SUPP_HEURISTIC, rho=100.0)
    obj = Objective(spec, [marker_target(synthetic(SUPP_HEURISTIC, [1e-3], 1200.0)[0], 600.0, False)])
    assert obj(np.array([1.0])) == math.inf  # K_O2 = 10 < 100 K_M
    assert math.isfinite(obj(np.log10([SUPP_HEURISTIC.K_O2])))


@pytest.mark.parametrize("free", [{"bogus": (1, 2)}, {"k_A": (2.0, 1.0)}, {"k_A": (0.0, 1.0)}, {}])
def test_spec_validation(free):
    with pytest.raises(InvalidInputError):
        FitSpec(free=free, base=SUPP_HEURISTIC)


def test_spec_from_dict():
    spec = FitSpec.from_dict({"base": "supp-heuristic", "free": {"k_A": [1e7, 1e9]},
                              "fixed": {"N_laser": 40}, "constraints": {"rho": 50}, "seed": 4})
    assert spec.base.N_laser == 40 and spec.rho == 50 and spec.seed == 4
    again = FitSpec.from_dict(spec.to_dict())
    assert again.free == spec.free and again.base == spec.base


def test_empty_curves():
    with pytest.raises(InsufficientDataError):
        fit([], FitSpec(free={"k_A": (1e7, 1e9)}, base=SUPP_HEURISTIC))


def test_marker_target_normalisation_and_loss_independent_of_density():
    dense = synthetic(SUPP_HEURISTIC, [1e-3], 3000.0)[0]
    sparse = GrowthCurve(dense.t[::30], dense.values[::30], P_O2=1e-3)
    a, b = marker_target(dense, 600.0, False), marker_target(sparse, 600.0, False)
    assert a.values == pytest.approx(b.values)
    n = marker_target(dense, 600.0, True)
    assert n.weight == pytest.approx(1 / (len(n.values) * np.max(np.abs(n.values)) ** 2))


def test_sweep_predict():
    out = sweep_predict(SUPP_HEURISTIC, [1e-3, 1e-2], 1200.0)
    assert [p for p, _ in out] == [1e-3, 1e-2]
    with pytest.raises(InvalidInputError):
        sweep_predict(SUPP_HEURISTIC, [1e-2, 1e-3], 1200.0)
    with pytest.raises(InvalidInputError):
        sweep_predict(SUPP_HEURISTIC, [], 1200.0)
