# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled batch trial kernel. Semantics match ``_pykernels.simulate_trials``."""
import numpy as np
from libc.stdint cimport int64_t, uint8_t

cdef int64_t NEVER = -1


cdef inline int64_t _latency(int64_t idle, const int64_t[::1] th, const int64_t[::1] lat) noexcept nogil:
    cdef Py_ssize_t i, stage = 0
    cdef Py_ssize_t ns = th.shape[0]
    if idle < 0:
        return lat[ns - 1]
    for i in range(1, ns):
        if idle >= th[i]:
            stage = i
        else:
            break
    return lat[stage]


def simulate_trials(kinds, durations, offsets, thresholds, latencies, int64_t reset_idle,
                    int probe_mode, int64_t probe_param, bint switch_before_probe,
                    int64_t clock, int64_t last_use):
    cdef const uint8_t[::1] k = np.ascontiguousarray(kinds, dtype=np.uint8)
    cdef const int64_t[::1] d = np.ascontiguousarray(durations, dtype=np.int64)
    cdef const int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const int64_t[::1] th = np.ascontiguousarray(thresholds, dtype=np.int64)
    cdef const int64_t[::1] lt = np.ascontiguousarray(latencies, dtype=np.int64)
    cdef Py_ssize_t n = off.shape[0] - 1
    e2e_arr = np.zeros(n, dtype=np.int64)
    plat_arr = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] e2e = e2e_arr
    cdef int64_t[::1] plat = plat_arr
    cdef Py_ssize_t i, j
    cdef int64_t start, t, ptime, end, lat
    cdef int64_t warm = lt[0]
    cdef bint pending

    with nogil:
        for i in range(n):
            start = clock + reset_idle
            t = start
            pending = probe_mode == 2
            ptime = start + probe_param
            for j in range(off[i], off[i + 1]):
                if k[j] == 0:
                    t += d[j]
                    continue
                if pending and ptime <= t:
                    if switch_before_probe:
                        last_use = NEVER
                    lat = _latency(ptime - last_use if last_use != NEVER else -1, th, lt)
                    plat[i] = lat
                    last_use = ptime + lat
                    pending = False
                if last_use != NEVER and t < last_use:
                    t = last_use  # unit still busy with the probe
                lat = _latency(t - last_use if last_use != NEVER else -1, th, lt)
                t += lat
                last_use = t
                if pending and ptime < t:
                    plat[i] = _latency(-1, th, lt) if switch_before_probe else warm
                    last_use = t + plat[i]
                    pending = False
            end = t
            if pending:
                if switch_before_probe:
                    last_use = NEVER
                lat = _latency(ptime - last_use if last_use != NEVER else -1, th, lt)
                plat[i] = lat
                last_use = ptime + lat
            elif probe_mode == 1:
                ptime = end + probe_param
                if switch_before_probe:
                    last_use = NEVER
                lat = _latency(ptime - last_use if last_use != NEVER else -1, th, lt)
                plat[i] = lat
                last_use = ptime + lat
            e2e[i] = end - start
            clock = end if (last_use == NEVER or end > last_use) else last_use

    return e2e_arr, plat_arr, clock, last_use
