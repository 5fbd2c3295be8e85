import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from licsim.adsorption import AdsorbateSpec, coverage, peak_pressure
from licsim.errors import InvalidInputError

finite = st.floats(min_value=0, max_value=1e6, allow_nan=False)


def test_single_species_half_coverage():
    # K P = 1 -> theta = 1/2
    res = coverage([AdsorbateSpec("O2", 2.0, 0.5)])
    assert res["O2"] == 0.5
    assert res.vacant == 0.5


def test_two_species_hand_values():
    res = coverage([AdsorbateSpec("O2", 1.0, 1.0), AdsorbateSpec("M", 2.0, 1.0)])
    assert res["O2"] == pytest.approx(0.25, rel=1e-15)
    assert res["M"] == pytest.approx(0.5, rel=1e-15)
    assert res.vacant == pytest.approx(0.25, rel=1e-15)


def test_empty_surface():
    res = coverage([])
    assert res.vacant == 1.0 and res.coverages == {}


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=6))
def test_coverages_sum_to_one(pairs):
    species = [AdsorbateSpec(f"s{i}", k, p) for i, (k, p) in enumerate(pairs)]
    res = coverage(species)
    assert all(0.0 <= v <= 1.0 for v in res.coverages.values())
    assert math.fsum(res.coverages.values()) + res.vacant == pytest.approx(1.0, abs=1e-12)


@given(st.floats(1e-3, 1e3), st.floats(1e-6, 1e3), st.floats(1.001, 10))
def test_coverage_monotone_in_own_pressure(k, p, factor):
    lo = coverage([AdsorbateSpec("a", k, p), AdsorbateSpec("b", 1.0, 1.0)])
    hi = coverage([AdsorbateSpec("a", k, p * factor), AdsorbateSpec("b", 1.0, 1.0)])
    assert hi["a"] >= lo["a"]
    assert hi["b"] <= lo["b"]


def test_peak_pressure_maximises_product():
    k, c = 217.0, 0.3
    p_star = peak_pressure(k, c)
    assert p_star == pytest.approx((1 + c) / k)

    def product(p):
        res = coverage([AdsorbateSpec("O2", k, p), AdsorbateSpec("M", 1.0, c)])
        return res["O2"] * res["M"]

    assert product(p_star) > product(p_star * 1.01)
    assert product(p_star) > product(p_star / 1.01)


@pytest.mark.parametrize("k,p", [(-1.0, 1.0), (1.0, -1.0), (math.nan, 1.0), (1.0, math.inf)])
def test_rejects_bad_inputs(k, p):
    with pytest.raises(InvalidInputError):
        AdsorbateSpec("x", k, p)


def test_rejects_duplicate_names():
    with pytest.raises(InvalidInputError):
        coverage([AdsorbateSpec("x", 1, 1), AdsorbateSpec("x", 2, 2)])
