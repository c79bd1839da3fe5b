import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from gatesim import channel as ch
from gatesim.channel import (
    AMX,
    AVX512,
    BitTransmission,
    ChannelConfig,
    analytic_bit_error,
    bandwidth,
    custom_source,
    decode_bit,
    from_bits,
    get_source,
    min_suppressing_resolution,
    monte_carlo_bit_error,
    noise_resilience,
    quantize,
    to_bits,
    transmit_bit,
    transmit_message,
)
from gatesim.decision import Threshold
from gatesim.stats import make_rng

from oracles import Q_AT_1


def test_config_invariants():
    for kw in (dict(sigma=-1), dict(trials_per_bit=0), dict(frequency=0), dict(timer_resolution=-1e-6),
               dict(round_time=0)):
        with pytest.raises(ValueError):
            ChannelConfig(**kw)
    with pytest.raises(ValueError):
        custom_source(0)
    with pytest.raises(ValueError):
        get_source("custom")
    with pytest.raises(ValueError):
        ChannelConfig.preset("lan")


def test_presets():
    assert ChannelConfig.preset("one_hop").sigma == 30_000
    assert ChannelConfig.preset("localhost").sigma == 3_000
    assert ChannelConfig.preset("none").sigma == 0


def test_transmit_bit_exact():
    tx = transmit_bit(1, 600, ChannelConfig(trials_per_bit=10), make_rng(0))
    assert tx.samples.tolist() == [20600.0] * 10


def test_transmit_bit_quantized():
    cfg = ChannelConfig(trials_per_bit=10, timer_resolution=5e-6)
    assert cfg.quantum_cycles == 10_000
    assert transmit_bit(1, 600, cfg, make_rng(0)).samples.tolist() == [20000.0] * 10


def test_transmit_bit_rejects_non_bit():
    with pytest.raises(ValueError):
        transmit_bit(2, 0, ChannelConfig(), make_rng(0))


def test_sample_count_equals_n():
    assert transmit_bit(0, 1e6, ChannelConfig(sigma=10, trials_per_bit=37), make_rng(0)).samples.shape == (37,)


def test_noise_clamped_nonnegative():
    cfg = ChannelConfig(sigma=1e6, trials_per_bit=1000)
    assert transmit_bit(0, 0, cfg, make_rng(0)).samples.min() == 0.0


def test_decode_below_tau():
    assert decode_bit(BitTransmission(1, np.array([1.0, 2.0])), Threshold(5, 0, 10)) == 0


def test_histograms_separate_vs_overlap():
    rng = make_rng(11)
    for src, separated in ((AMX, True), (AVX512, False)):
        cfg = ChannelConfig(sigma=30_000, source=src, trials_per_bit=2000)
        m0 = transmit_bit(0, 1e6, cfg, rng).mean
        m1 = transmit_bit(1, 1e6, cfg, rng).mean
        se = 30_000 / math.sqrt(2000)
        assert ((m1 - m0) > 10 * se) == separated


def test_message_examples():
    dec, ber = transmit_message("I", ChannelConfig.preset("one_hop"), make_rng(0))
    assert dec == b"I" and ber == 0.0
    dec, ber = transmit_message(b"I", ChannelConfig(source=AVX512, trials_per_bit=5), make_rng(0))
    assert ber == 0.0 and dec == b"I"


def test_avx_message_near_chance():
    cfg = ChannelConfig.preset("one_hop", source=AVX512)
    bers = [transmit_message("I", cfg, make_rng(s)).ber for s in range(40)]
    assert np.mean(bers) == pytest.approx(0.5, abs=0.15)


def test_message_result_json():
    res = transmit_message("I", ChannelConfig(trials_per_bit=3), make_rng(0))
    doc = json.loads(res.to_json())
    assert doc == {"message": "I", "decoded": "I", "ber": 0.0, "bits": 8, "trials_per_bit": 3}
    with pytest.raises(ValueError):
        transmit_message("", ChannelConfig(), make_rng(0))


@given(st.binary(min_size=0, max_size=16))
def test_bits_round_trip(data):
    assert from_bits(to_bits(data)) == data


def test_bits_msb_first():
    assert to_bits(b"I") == [0, 1, 0, 0, 1, 0, 0, 1]


def test_analytic_examples():
    assert analytic_bit_error(2.0, 1.0, 1) == pytest.approx(Q_AT_1, abs=1e-9)
    assert analytic_bit_error(20_000, 30_000, 500) < 1e-12
    assert analytic_bit_error(150, 30_000, 500) == pytest.approx(norm.sf(150 * math.sqrt(500) / 60_000), abs=1e-12)
    assert analytic_bit_error(150, 30_000, 500) == pytest.approx(0.478, abs=1e-3)
    assert analytic_bit_error(150, 30_000, 10**9) < 1e-12
    assert analytic_bit_error(1, 0, 1) == 0.0


@settings(deadline=None, max_examples=25)
@given(delta=st.sampled_from([150, 600, 6000, 20000]), sigma=st.sampled_from([3000.0, 30000.0]),
       n=st.sampled_from([1, 20]), seed=st.integers(0, 2**31))
def test_monte_carlo_agrees_with_closed_form(delta, sigma, n, seed):
    got = monte_carlo_bit_error(delta, sigma, n, 4000, make_rng(seed))
    assert got == pytest.approx(analytic_bit_error(delta, sigma, n), abs=0.025)


@given(delta=st.floats(1, 1e5), n=st.integers(1, 2000), s1=st.floats(0, 1e6), s2=st.floats(0, 1e6))
def test_ber_non_decreasing_in_sigma(delta, n, s1, s2):
    lo, hi = sorted((s1, s2))
    assert analytic_bit_error(delta, lo, n) <= analytic_bit_error(delta, hi, n)


def test_noise_resilience_examples():
    assert noise_resilience(AMX, 500) == pytest.approx(96_100, rel=1e-3)
    assert noise_resilience(AVX512, 500) == pytest.approx(721, rel=1e-3)
    assert noise_resilience(AMX, 2000) == pytest.approx(2 * noise_resilience(AMX, 500))
    # at sigma_max the per-bit error equals 1 - confidence
    s = noise_resilience(AMX, 500, 0.99)
    assert analytic_bit_error(AMX.delta, s, 500) == pytest.approx(0.01, rel=1e-9)


def test_bandwidth_examples():
    assert bandwidth(ChannelConfig(trials_per_bit=1000, round_time=0.015)) == pytest.approx(1 / 15)
    assert bandwidth(ChannelConfig(trials_per_bit=1, round_time=0.015)) == pytest.approx(1 / 0.015)
    assert bandwidth(ChannelConfig()) / 1e-6 == pytest.approx(6.67e4, rel=1e-3)


def test_min_suppressing_resolution_examples():
    assert min_suppressing_resolution(AMX) == 10e-6
    assert min_suppressing_resolution(AVX512) == pytest.approx(75e-9)


def test_five_microsecond_timer_keeps_amx_separable():
    cfg = ChannelConfig(timer_resolution=5e-6, trials_per_bit=10)
    assert monte_carlo_bit_error(AMX.delta, 0.0, 10, 100, make_rng(0), timer_resolution=5e-6) == 0.0
    assert transmit_message("I", cfg, make_rng(0)).ber == 0.0


def test_coarsening_at_gap_resolution_hides_bits_with_zero_base():
    res = min_suppressing_resolution(AMX)
    q = quantize([0.0, AMX.delta - 1], res * 1.0001, 2e9)
    assert q.tolist() == [0.0, 0.0]


def test_quantize_floor_and_passthrough():
    assert quantize([20600.0], 5e-6, 2e9).tolist() == [20000.0]
    assert quantize([123.4], 0.0, 2e9).tolist() == [123.4]


def test_preamble_inverted_flag():
    cfg = ChannelConfig(sigma=0.0, trials_per_bit=4)
    pre = ch.preamble(cfg, make_rng(0))
    assert not pre.inverted
    assert pre.threshold.tau == 1_000_000 + 10_000


def test_histogram_csv():
    txt = ch.histogram_csv([BitTransmission(0, np.array([1.0, 2.5]))])
    assert txt == "bit_index,sample_cycles\n0,1.0\n0,2.5\n"


def test_resilience_sweep_csv():
    rows = ch.resilience_sweep(AMX, 10, [0.0, 1e6], 200, make_rng(0))
    assert rows[0] == (0.0, 1.0)
    assert ch.resilience_csv(rows).splitlines()[0] == "sigma_cycles,accuracy"
