"""Single-instruction timing magnifier.

Park the unit ``epsilon`` cycles short of a stage threshold, let the victim
snippet run, then time one instruction. A snippet delay of at least
``epsilon`` tips the unit into the colder stage and the observed latency
jumps by the full stage gap.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

from .power_gate import DEFAULT_FREQUENCY_HZ, AcceleratorState, PowerGateTable, default_table, invoke


@dataclass(frozen=True)
class MagnifierAlignment:
    boundary_stage: int = 3
    epsilon: int = 100

    def validate(self, table: PowerGateTable) -> None:
        s = self.boundary_stage
        if not 0 <= s < table.deepest:
            raise ValueError(f"boundary stage must be in [0, {table.deepest}), got {s}")
        width = table.stages[s + 1].min_idle - table.stages[s].min_idle
        if not 0 < self.epsilon < width:
            raise ValueError(f"epsilon must be in (0, {width}) for boundary {s}->{s + 1}, got {self.epsilon}")


def magnify(delta: int, align: MagnifierAlignment = MagnifierAlignment(),
            table: PowerGateTable | None = None) -> tuple[int, int]:
    """Returns ``(observed_latency, amplified_gap)`` for a snippet delay of ``delta`` cycles."""
    table = table or default_table()
    align.validate(table)
    if delta < 0:
        raise ValueError("delta must be >= 0")
    _, warm = invoke(AcceleratorState(table), 0)
    wait = table.stages[align.boundary_stage + 1].min_idle - align.epsilon
    observed, _ = invoke(warm, warm.last_use + wait + int(delta))
    return observed, observed - table.stages[align.boundary_stage].latency


def detectability_at_resolution(gap: float, resolution: float, frequency: float = DEFAULT_FREQUENCY_HZ) -> bool:
    """True iff the gap covers at least one timer quantum."""
    return gap >= round(resolution * frequency, 6)


def sweep(deltas: Iterable[int], align: MagnifierAlignment = MagnifierAlignment(),
          table: PowerGateTable | None = None) -> list[tuple[int, int, int]]:
    return [(int(d), *magnify(d, align, table)) for d in deltas]


def sweep_csv(rows: Iterable[tuple[int, int, int]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta_cycles", "observed_latency", "amplified_gap"])
    w.writerows(rows)
    return buf.getvalue()
