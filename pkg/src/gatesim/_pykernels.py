"""Pure-Python batch trial kernel. Mirrors ``_ckernels.pyx`` line for line."""
from __future__ import annotations

import numpy as np

COMPUTE = 0
INVOKE = 1

PROBE_NONE = 0
PROBE_AFTER_END = 1
PROBE_AT_OFFSET = 2

NEVER = -1


def _latency(idle, thresholds, latencies):
    if idle < 0:  # never used
        return latencies[-1]
    stage = 0
    for i in range(1, len(thresholds)):
        if idle >= thresholds[i]:
            stage = i
        else:
            break
    return latencies[stage]


def simulate_trials(kinds, durations, offsets, thresholds, latencies, reset_idle,
                    probe_mode, probe_param, switch_before_probe, clock, last_use):
    """Execute ``len(offsets) - 1`` victim traces back to back on one unit.

    Trial ``i`` owns events ``offsets[i]:offsets[i+1]``. Each trial starts
    ``reset_idle`` cycles after the previous trial's last activity. Returns
    ``(end_to_end, probe_latency, clock, last_use)``; ``probe_latency`` is -1
    when no probe is taken.
    """
    kinds = np.asarray(kinds).tolist()
    durations = np.asarray(durations).tolist()
    offsets = np.asarray(offsets).tolist()
    thresholds = np.asarray(thresholds).tolist()
    latencies = np.asarray(latencies).tolist()
    n = len(offsets) - 1
    e2e = [0] * n
    plat = [-1] * n
    warm = latencies[0]

    for i in range(n):
        start = clock + reset_idle
        t = start
        pending = probe_mode == PROBE_AT_OFFSET
        ptime = start + probe_param
        for j in range(offsets[i], offsets[i + 1]):
            if kinds[j] == COMPUTE:
                t += durations[j]
                continue
            if pending and ptime <= t:
                if switch_before_probe:
                    last_use = NEVER
                lat = _latency(ptime - last_use if last_use != NEVER else -1, thresholds, latencies)
                plat[i] = lat
                last_use = ptime + lat
                pending = False
            if last_use != NEVER and t < last_use:
                t = last_use  # unit still busy with the probe
            lat = _latency(t - last_use if last_use != NEVER else -1, thresholds, latencies)
            t += lat
            last_use = t
            if pending and ptime < t:
                # unit busy with the victim: probe serializes behind it
                plat[i] = _latency(-1, thresholds, latencies) if switch_before_probe else warm
                last_use = t + plat[i]
                pending = False
        end = t
        if pending:
            if switch_before_probe:
                last_use = NEVER
            lat = _latency(ptime - last_use if last_use != NEVER else -1, thresholds, latencies)
            plat[i] = lat
            last_use = ptime + lat
        elif probe_mode == PROBE_AFTER_END:
            ptime = end + probe_param
            if switch_before_probe:
                last_use = NEVER
            lat = _latency(ptime - last_use if last_use != NEVER else -1, thresholds, latencies)
            plat[i] = lat
            last_use = ptime + lat
        e2e[i] = end - start
        clock = end if last_use == NEVER or end > last_use else last_use

    return np.asarray(e2e, dtype=np.int64), np.asarray(plat, dtype=np.int64), clock, last_use
