"""Defenses against reuse-distance timing leakage and their overhead model.

``FixedStage`` pins the unit to one stage (constant latency). ``ResetOnSwitch``
forgets the unit's history on every context switch, so the next user always
starts from the deepest stage.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from . import attacker
from .power_gate import AcceleratorState, PowerGateTable, invoke


@dataclass(frozen=True)
class NoMitigation:
    kind = "none"
    resets_before_probe = False

    def latency_table(self, table: PowerGateTable) -> PowerGateTable:
        return table


@dataclass(frozen=True)
class FixedStage:
    stage: int
    kind = "fixed"
    resets_before_probe = False

    def __post_init__(self):
        if not 0 <= self.stage <= 4:
            raise ValueError(f"fixed stage must be 0..4, got {self.stage}")

    def latency_table(self, table: PowerGateTable) -> PowerGateTable:
        lat = table.stage(self.stage).latency
        return table.with_latencies({s.stage_id: lat for s in table.stages}, f"{table.profile_name}+fixed{self.stage}")


@dataclass(frozen=True)
class ResetOnSwitch:
    switch_rate: float = 0.0
    kind = "reset"
    resets_before_probe = True

    def __post_init__(self):
        if self.switch_rate < 0:
            raise ValueError("switch_rate must be >= 0")

    def latency_table(self, table: PowerGateTable) -> PowerGateTable:
        return table


MitigationPolicy = Union[NoMitigation, FixedStage, ResetOnSwitch]


def parse_policy(name: str, stage: int | None = None, rate: float = 0.0) -> MitigationPolicy:
    if name == "none":
        return NoMitigation()
    if name == "fixed":
        if stage is None:
            raise ValueError("fixed policy needs a stage")
        return FixedStage(stage)
    if name == "reset":
        return ResetOnSwitch(rate)
    raise ValueError(f"unknown policy {name!r} (none, fixed, reset)")


def context_switch(state: AcceleratorState) -> None:
    """OS reset on task switch: the next invocation sees a never-used unit."""
    state.last_use = None


def mitigated_invoke(policy: MitigationPolicy, state: AcceleratorState, now: int) -> tuple[int, AcceleratorState]:
    if isinstance(policy, FixedStage):
        _, new = invoke(state, now)  # validates the clock
        lat = state.table.stage(policy.stage).latency
        return lat, AcceleratorState(state.table, now + lat)
    return invoke(state, now)


# Overhead (%) measured per fixed stage: (power, performance).
FIXED_STAGE_OVERHEAD = {0: (12.0, 0.0), 1: (8.1, 2.5), 2: (5.0, 11.1), 3: (2.6, 19.0), 4: (0.0, 35.0)}

RESET_RATES = (0, 10, 50, 100, 200, 300, 400, 500, 750, 1000)
RESET_POWER = (0.0, 0.6, 1.9, 3.5, 5.7, 7.0, 8.4, 9.3, 10.8, 11.6)
RESET_PERF = (0.0, 1.0, 3.5, 6.0, 10.0, 13.5, 17.0, 20.0, 25.0, 30.0)


def overhead(policy: MitigationPolicy, switch_rate: float) -> tuple[float, float]:
    """``(power %, performance %)`` at ``switch_rate`` context switches per second.

    Reset-on-switch interpolates linearly between anchors and holds the last
    anchor beyond 1000/s.
    """
    if switch_rate < 0:
        raise ValueError("switch_rate must be >= 0")
    if isinstance(policy, FixedStage):
        return FIXED_STAGE_OVERHEAD[policy.stage]
    if isinstance(policy, ResetOnSwitch):
        return (float(np.interp(switch_rate, RESET_RATES, RESET_POWER)),
                float(np.interp(switch_rate, RESET_RATES, RESET_PERF)))
    return 0.0, 0.0


@dataclass(frozen=True)
class OverheadCurve:
    policy: MitigationPolicy
    points: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if any(p < 0 or q < 0 for _, p, q in self.points):
            raise ValueError("overheads must be >= 0")


def overhead_curve(policy: MitigationPolicy, rates: Sequence[float] = RESET_RATES) -> OverheadCurve:
    return OverheadCurve(policy, tuple((float(r), *overhead(policy, r)) for r in rates))


def policy_label(policy: MitigationPolicy) -> str:
    if isinstance(policy, FixedStage):
        return f"fixed{policy.stage}"
    return policy.kind


def overhead_csv(curves: Iterable[OverheadCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "switch_rate", "power_pct", "perf_pct"])
    for c in curves:
        for r, p, q in c.points:
            w.writerow([policy_label(c.policy), f"{r:g}", f"{p:.2f}", f"{q:.2f}"])
    return buf.getvalue()


def leakage_under_policy(policy: MitigationPolicy, scenario: attacker.Scenario, trials: int, rng: np.random.Generator,
                         threat: attacker.Threat = attacker.Threat.PROBE, **kw) -> attacker.ConfusionMetrics:
    return attacker.run_attack(scenario, trials, threat, rng, policy=policy, **kw).metrics
