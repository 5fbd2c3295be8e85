import json
import math
import os
import tempfile

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from licsim.config import load_environment, load_params, log_range, params_from_dict
from licsim.curves import GrowthCurve, fmt, read_curve, write_curve
from licsim.errors import InvalidInputError, MalformedDataError
from licsim.kinetics import SUPP_HEURISTIC


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=2, max_size=20))
def test_curve_csv_round_trip_is_exact(values):
    c = GrowthCurve(np.arange(len(values), dtype=float), values, kind="volume")
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "c.csv")
        write_curve(path, c)
        back = read_curve(path, kind="volume")
    assert back.values.tolist() == c.values.tolist()


@pytest.mark.parametrize("t,v", [([0, 0], [1, 2]), ([0, 1], [1, math.inf]), ([0, 1], [1])])
def test_curve_validation(t, v):
    with pytest.raises(InvalidInputError):
        GrowthCurve(t, v)


def test_fmt():
    assert [fmt(None), fmt(math.nan), fmt(3), fmt(0.1), fmt(True)] == ["", "nan", "3", "0.1", "true"]


def test_read_curve_bad_number(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("t_s,volume\n0,1\n1,oops\n")
    with pytest.raises(MalformedDataError, match="c.csv:3"):
        read_curve(p, kind="volume")


def test_params_overrides_and_nesting(tmp_path):
    assert load_params("supp-heuristic") == SUPP_HEURISTIC
    f = tmp_path / "p.json"
    f.write_text(json.dumps({"params": {"base": "supp-heuristic", "N_laser": 10}}))
    assert load_params(str(f)) == SUPP_HEURISTIC.replace(N_laser=10.0)
    with pytest.raises(InvalidInputError):
        params_from_dict({"base": "nope"})
    with pytest.raises(FileNotFoundError):
        load_params(str(tmp_path / "missing.json"))


def test_environment_file(tmp_path):
    f = tmp_path / "e.json"
    f.write_text(json.dumps({"P_O2": 0.1, "inert_species": [
        {"name": "N2", "equilibrium_constant": 1.0, "partial_pressure": 1.0}]}))
    env = load_environment(str(f))
    assert env.P_O2 == 0.1 and env.inert_species[0].name == "N2"
    f.write_text("{not json")
    with pytest.raises(MalformedDataError):
        load_environment(str(f))


def test_log_range():
    assert log_range(1e-8, 10, 10).tolist() == pytest.approx(np.logspace(-8, 1, 10).tolist())
    with pytest.raises(InvalidInputError):
        log_range(0, 1, 3)
