"""Victim-side execution traces for secret-gated matrix-unit code paths.

A trace is an ordered list of compute segments and accelerator invocations.
Compute segments carry a fixed duration; an invocation's duration is decided
by the power-gate state machine when the trace is executed.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .kernels import COMPUTE, INVOKE
from .power_gate import AcceleratorState, invoke


class EventKind(enum.IntEnum):
    COMPUTE = COMPUTE
    ACCEL_INVOKE = INVOKE


@dataclass(frozen=True)
class TraceEvent:
    kind: EventKind
    duration: int = 0

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("compute duration must be >= 0")


@dataclass(frozen=True, eq=False)
class GadgetTrace:
    """Events stored column-wise; ``label`` is the ground-truth secret, for scoring only."""

    kinds: np.ndarray
    durations: np.ndarray
    label: int

    def __post_init__(self):
        if len(self.kinds) == 0:
            raise ValueError("trace must be non-empty")
        if len(self.kinds) != len(self.durations):
            raise ValueError("kinds and durations differ in length")

    @classmethod
    def from_events(cls, events: Iterable[TraceEvent], label: int) -> "GadgetTrace":
        events = list(events)
        kinds = np.array([int(e.kind) for e in events], dtype=np.uint8)
        durs = np.array([e.duration if e.kind == EventKind.COMPUTE else 0 for e in events], dtype=np.int64)
        return cls(kinds, durs, int(label))

    @property
    def events(self) -> list[TraceEvent]:
        return [TraceEvent(EventKind(int(k)), int(d)) for k, d in zip(self.kinds, self.durations)]

    @property
    def invoke_count(self) -> int:
        return int(np.count_nonzero(self.kinds == INVOKE))

    @property
    def compute_total(self) -> int:
        return int(self.durations[self.kinds == COMPUTE].sum())

    def __len__(self) -> int:
        return len(self.kinds)


@dataclass(frozen=True)
class MoEConfig:
    """Two-expert mixture: expert 0 is the deep one, expert 1 the shallow one.

    ``probe_offset`` is when a co-resident attacker probes, counted from the
    trigger; ``None`` means the nominal compute time of the deep expert.
    """

    layers_high: int = 24
    layers_low: int = 16
    per_layer_compute: int = 50_000
    per_layer_jitter_sigma: float = 8_000.0
    amx_calls_per_layer: int = 1
    probe_offset: int | None = None

    def __post_init__(self):
        if not 1 <= self.layers_low < self.layers_high:
            raise ValueError(f"need 1 <= layers_low < layers_high, got {self.layers_low}, {self.layers_high}")
        if self.per_layer_jitter_sigma < 0:
            raise ValueError("jitter sigma must be >= 0")
        if self.per_layer_compute < 0 or self.amx_calls_per_layer < 1:
            raise ValueError("per_layer_compute must be >= 0 and amx_calls_per_layer >= 1")
        if self.probe_offset is not None and self.probe_offset < 0:
            raise ValueError("probe_offset must be >= 0")

    @property
    def layer_gap(self) -> int:
        return self.layers_high - self.layers_low

    @property
    def effective_probe_offset(self) -> int:
        if self.probe_offset is not None:
            return self.probe_offset
        return self.layers_high * self.per_layer_compute

    def layers_for(self, expert: int) -> int:
        if expert not in (0, 1):
            raise ValueError(f"expert index must be 0 or 1, got {expert}")
        return self.layers_high if expert == 0 else self.layers_low


@dataclass(frozen=True)
class EarlyExitConfig:
    total_layers: int = 6
    exit_after: int = 2
    per_layer_compute: int = 12_000
    padding_to_equal_time: bool = True
    probe_setup_delay: int = 1_000

    def __post_init__(self):
        if not 1 <= self.exit_after < self.total_layers:
            raise ValueError(f"need 1 <= exit_after < total_layers, got {self.exit_after}, {self.total_layers}")
        if self.per_layer_compute < 0 or self.probe_setup_delay < 0:
            raise ValueError("durations must be >= 0")

    @property
    def skipped_layers(self) -> int:
        return self.total_layers - self.exit_after

    @property
    def padding(self) -> int:
        return self.skipped_layers * self.per_layer_compute if self.padding_to_equal_time else 0


@dataclass(frozen=True)
class MembershipModel:
    """Exit probabilities for training-set members vs. non-members.

    ``member_prior`` is the share of members among attacked queries; ``gadget``
    is the early-exit model the membership signal flows through.
    """

    p_exit_member: float = 0.78
    p_exit_nonmember: float = 0.16
    member_prior: float = 0.62
    gadget: EarlyExitConfig = field(default_factory=lambda: EarlyExitConfig(total_layers=24, exit_after=12))

    def __post_init__(self):
        for name in ("p_exit_member", "p_exit_nonmember", "member_prior"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


def _jittered(cfg: MoEConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    base = np.full(n, float(cfg.per_layer_compute))
    if cfg.per_layer_jitter_sigma > 0:
        base += rng.normal(0.0, cfg.per_layer_jitter_sigma, n)
    # segment length cannot go negative
    return np.rint(np.maximum(base, 0.0)).astype(np.int64)


def moe_trace(expert: int, cfg: MoEConfig, rng: np.random.Generator) -> GadgetTrace:
    layers = cfg.layers_for(expert)
    per = 1 + cfg.amx_calls_per_layer
    kinds = np.full(layers * per, INVOKE, dtype=np.uint8)
    kinds[::per] = COMPUTE
    durs = np.zeros(layers * per, dtype=np.int64)
    durs[::per] = _jittered(cfg, layers, rng)
    return GadgetTrace(kinds, durs, expert)


def early_exit_trace(exit: bool, cfg: EarlyExitConfig) -> GadgetTrace:
    layers = cfg.exit_after if exit else cfg.total_layers
    kinds = np.tile(np.array([COMPUTE, INVOKE], dtype=np.uint8), layers)
    durs = np.zeros(2 * layers, dtype=np.int64)
    durs[::2] = cfg.per_layer_compute
    if exit and cfg.padding:
        kinds = np.append(kinds, np.uint8(COMPUTE))
        durs = np.append(durs, np.int64(cfg.padding))
    return GadgetTrace(kinds, durs, int(bool(exit)))


def membership_exit(is_member: bool, model: MembershipModel, rng: np.random.Generator) -> bool:
    p = model.p_exit_member if is_member else model.p_exit_nonmember
    return bool(rng.random() < p)


def execute_trace(trace: GadgetTrace, state: AcceleratorState, start: int) -> tuple[int, AcceleratorState, int | None]:
    """Walk the trace on ``state`` from ``start``.

    Returns ``(end_to_end, final_state, last_accel_completion)``, the last being
    ``None`` for traces without invocations.
    """
    if state.last_use is not None and start < state.last_use:
        state.idle_at(start)  # raises ClockRegressionError
    t = start
    last_done = None
    for kind, dur in zip(trace.kinds.tolist(), trace.durations.tolist()):
        if kind == COMPUTE:
            t += dur
        else:
            lat, state = invoke(state, t)
            t += lat
            last_done = t
    return t - start, state, last_done


def pack_traces(traces: Sequence[GadgetTrace]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Concatenate traces into ``(kinds, durations, offsets)`` for the batch kernel."""
    lengths = np.fromiter((len(t) for t in traces), dtype=np.int64, count=len(traces))
    offsets = np.zeros(len(traces) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    if not traces:
        return np.zeros(0, np.uint8), np.zeros(0, np.int64), offsets
    kinds = np.concatenate([t.kinds for t in traces])
    durs = np.concatenate([t.durations for t in traces])
    return kinds, durs, offsets


def trace_csv(trace: GadgetTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "kind", "duration_cycles"])
    for i, ev in enumerate(trace.events):
        w.writerow([i, "compute" if ev.kind == EventKind.COMPUTE else "accel_invoke",
                    ev.duration if ev.kind == EventKind.COMPUTE else ""])
    return buf.getvalue()
