import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gatesim import kernels
from gatesim.gadgets import GadgetTrace, execute_trace, pack_traces
from gatesim.power_gate import AcceleratorState, c1e_table, default_table

from oracles import replay

event = st.one_of(st.tuples(st.just(0), st.integers(0, 3 * 10**5)), st.just((1, 0)))
trace = st.lists(event, min_size=1, max_size=12)
traces = st.lists(trace, min_size=1, max_size=6)

BACKENDS = [kernels.python_simulate_trials]
if kernels.compiled_simulate_trials is not None:
    BACKENDS.append(kernels.compiled_simulate_trials)


def _pack(trs):
    return pack_traces([GadgetTrace(np.array([k for k, _ in t], np.uint8), np.array([d for _, d in t], np.int64), 0)
                        for t in trs])


def _run(fn, trs, table, reset, mode, param, switch):
    th, lat = table.kernel_arrays()
    k, d, o = _pack(trs)
    e2e, plat, _, _ = fn(k, d, o, th, lat, reset, mode, param, switch, 0, kernels.NEVER)
    return e2e.tolist(), plat.tolist()


MODES = {None: kernels.PROBE_NONE, "after": kernels.PROBE_AFTER_END, "offset": kernels.PROBE_AT_OFFSET}


@pytest.mark.parametrize("fn", BACKENDS, ids=lambda f: f.__module__)
@settings(max_examples=300, deadline=None)
@given(trs=traces, probe=st.sampled_from([None, "after", "offset"]), param=st.integers(0, 10**6),
       reset=st.sampled_from([0, 500, 2 * 10**4, 10**7]), switch=st.booleans(), c1e=st.booleans())
def test_kernel_matches_timeline_replay(fn, trs, probe, param, reset, switch, c1e):
    table = c1e_table() if c1e else default_table()
    th, lat = table.kernel_arrays()
    want = replay(trs, th.tolist(), lat.tolist(), reset, probe, param, switch)
    assert _run(fn, trs, table, reset, MODES[probe], param, switch) == (want[0], want[1])


@settings(max_examples=200, deadline=None)
@given(trs=traces, reset=st.sampled_from([0, 1500, 10**7]))
def test_end_to_end_matches_execute_trace(trs, reset):
    table = default_table()
    e2e, _ = _run(kernels.simulate_trials, trs, table, reset, kernels.PROBE_NONE, 0, False)
    state, clock = AcceleratorState(table), 0
    for t, got in zip(trs, e2e):
        tr = GadgetTrace(np.array([k for k, _ in t], np.uint8), np.array([d for _, d in t], np.int64), 0)
        start = clock + reset
        want, state, _ = execute_trace(tr, state, start)
        assert got == want
        clock = max(start + want, state.last_use or 0)


def test_probe_behind_inflight_invoke_then_victim_waits():
    # probe lands inside the first invoke (cold, 20000 cycles) and runs warm right after it;
    # the victim's next invoke, issued at zero compute, must queue behind the probe
    trs = [[(1, 0), (0, 0), (1, 0)]]
    for fn in BACKENDS:
        e2e, plat = _run(fn, trs, default_table(), 10**7, kernels.PROBE_AT_OFFSET, 100, False)
        assert plat == [50]
        assert e2e == [20000 + 50 + 50]


def test_backend_selection_reported():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.simulate_trials is (kernels.compiled_simulate_trials or kernels.python_simulate_trials)
