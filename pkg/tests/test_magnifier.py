import pytest
from hypothesis import given, strategies as st

from gatesim.decision import Threshold, classify
from gatesim.magnifier import MagnifierAlignment, detectability_at_resolution, magnify, sweep, sweep_csv
from gatesim.power_gate import c1e_table, default_table

from oracles import STAGE_LATENCY, brute_stage


def test_reference_example():
    assert magnify(200) == (20_000, 11_000)
    assert magnify(0) == (9_000, 0)


def test_boundary_1_gap():
    assert magnify(150, MagnifierAlignment(1, 100))[1] == 6000 - 600


@pytest.mark.parametrize("s,eps", [(4, 100), (-1, 100), (3, 0), (0, 1000), (1, 9000)])
def test_alignment_validation(s, eps):
    with pytest.raises(ValueError):
        magnify(10, MagnifierAlignment(s, eps))


def test_negative_delta():
    with pytest.raises(ValueError):
        magnify(-1)


@pytest.mark.parametrize("s", [0, 1, 2, 3])
def test_step_response_exhaustive(s):
    eps = 100
    jump = STAGE_LATENCY[s + 1] - STAGE_LATENCY[s]
    for d in range(0, 2 * eps + 1):
        assert magnify(d, MagnifierAlignment(s, eps))[1] == (jump if d >= eps else 0)


@given(s=st.integers(0, 3), eps=st.integers(1, 899), data=st.data())
def test_gap_is_adjacent_difference_or_zero(s, eps, data):
    d = data.draw(st.integers(0, 2 * eps))
    gap = magnify(d, MagnifierAlignment(s, eps))[1]
    assert gap in (0, STAGE_LATENCY[s + 1] - STAGE_LATENCY[s])


@given(s=st.integers(0, 3), eps=st.integers(1, 899), d=st.integers(0, 10**8))
def test_observed_matches_interval_scan(s, eps, d):
    idle = default_table().thresholds[s + 1] - eps + d
    assert magnify(d, MagnifierAlignment(s, eps))[0] == STAGE_LATENCY[brute_stage(idle)]


def test_classify_composition():
    t = Threshold(9000 + 5500, 9000, 20000)
    for d in range(0, 201):
        assert classify(magnify(d)[0], t) == int(d >= 100)


@pytest.mark.parametrize("gap,res,want", [(11_000, 5e-6, True), (200, 5e-6, False), (10_000, 5e-6, True)])
def test_detectability(gap, res, want):
    assert detectability_at_resolution(gap, res) is want


def test_other_profile():
    assert magnify(200, table=c1e_table()) == (9_000, 0)


def test_sweep_csv():
    rows = sweep([0, 100])
    assert sweep_csv(rows) == "delta_cycles,observed_latency,amplified_gap\n0,9000,0\n100,20000,11000\n"
