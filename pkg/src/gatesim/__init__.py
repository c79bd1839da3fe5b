"""Simulator for timing channels created by accelerator power gating."""
from .kernels import BACKEND
from .power_gate import (
    AcceleratorState,
    PowerGateTable,
    StageSpec,
    c1e_table,
    characterize,
    default_table,
    invoke,
    power_draw,
    stage_for_idle,
)

__all__ = [
    "BACKEND",
    "AcceleratorState",
    "PowerGateTable",
    "StageSpec",
    "c1e_table",
    "characterize",
    "default_table",
    "invoke",
    "power_draw",
    "stage_for_idle",
]
__version__ = "0.1.0"
