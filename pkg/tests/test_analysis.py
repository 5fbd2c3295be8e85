import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from licsim.analysis import (RegimeReport, Thresholds, classify_sweep, delta_at, fit_onset, report,
                             reports_json, write_summary)
from licsim.curves import GrowthCurve
from licsim.errors import InsufficientDataError, InvalidInputError, OutOfRangeError

T = np.arange(0, 12001.0, 600.0)


def hinge(t0, m, b=0.0):
    return GrowthCurve(T, b + m * np.maximum(0.0, T - t0))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, len(T) - 2), st.floats(1e-4, 10.0), st.floats(-5.0, 5.0))
def test_noiseless_hinge_recovered(i0, m, b):
    f = fit_onset(hinge(T[i0], m, b))
    assert f.onset_time == T[i0]
    assert f.post_onset_rate == pytest.approx(m, rel=1e-8)
    assert f.baseline == pytest.approx(b, abs=1e-8 * max(1.0, m * T[-1]))


def test_flat_curve_reports_no_growth():
    f = fit_onset(GrowthCurve(T, np.full_like(T, 3.0)))
    assert f.no_growth and f.post_onset_rate == 0.0 and f.onset_time == 0.0


def test_straight_line_onset_at_start():
    f = fit_onset(GrowthCurve(T, 2.0 * T))
    assert f.onset_time == 0.0 and f.post_onset_rate == pytest.approx(2.0)


def test_too_few_samples():
    with pytest.raises(InsufficientDataError):
        fit_onset(GrowthCurve([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]))


def test_delta_at_interpolates_and_refuses_extrapolation():
    c = GrowthCurve([0.0, 100.0, 200.0], [5.0, 7.0, 11.0])
    assert delta_at(c, 150.0) == pytest.approx(4.0)
    with pytest.raises(OutOfRangeError):
        delta_at(c, 250.0)


def _rep(onset_min, rate, delta):
    return RegimeReport(onset_min * 60.0, rate, delta)


def test_classification_rules():
    pts = [(1e-4, _rep(0, 1.0, 50)), (1e-3, _rep(0, 1.5, 80)), (1e-2, _rep(10, 1.6, 100)),
           (1e-1, _rep(40, 1.4, 70)), (1.0, _rep(60, 1.2, 40)), (10.0, _rep(0, 0.0, 5))]
    cls = classify_sweep(pts)
    assert cls.labels == ["I", "I", "I", "II", "II", "III"]
    assert cls.peak_pressure == 1e-2
    assert cls.effective_etch_threshold == pytest.approx(10.0)
    assert cls.runs("II") == [[3, 4]]


def test_classification_sorts_input_and_rejects_duplicates():
    pts = [(1.0, _rep(0, 1, 1)), (0.1, _rep(0, 1, 5)), (0.01, _rep(0, 1, 2))]
    assert classify_sweep(pts).pressures.tolist() == [0.01, 0.1, 1.0]
    with pytest.raises(InvalidInputError):
        classify_sweep(pts + [(0.1, _rep(0, 1, 5))])
    with pytest.raises(InsufficientDataError):
        classify_sweep(pts[:2])


def test_delayed_onset_below_peak_is_not_regime_two():
    pts = [(1e-3, _rep(60, 1, 50)), (1e-2, _rep(0, 1, 100)), (1e-1, _rep(60, 1, 60))]
    assert classify_sweep(pts).labels == ["I", "I", "II"]


def test_thresholds_override():
    pts = [(1e-3, _rep(0, 1, 50)), (1e-2, _rep(0, 1, 100)), (1e-1, _rep(15, 1, 60))]
    assert classify_sweep(pts, Thresholds(onset_threshold=600.0)).labels == ["I", "I", "II"]
    assert classify_sweep(pts, Thresholds(etch_threshold=55.0)).labels == ["III", "I", "I"]


def test_outputs():
    pts = [(1e-3, report(hinge(0, 1.0))), (1e-2, report(hinge(1200, 2.0))), (1e-1, report(hinge(0, 0.0)))]
    cls = classify_sweep(pts)
    text = write_summary(None, cls)
    assert text.splitlines()[0] == "P_O2,onset_min,rate,delta_200min,regime"
    doc = json.loads(reports_json(cls))
    assert [p["regime"] for p in doc["points"]] == cls.labels
    assert doc["points"][1]["onset_time"] == 1200.0
