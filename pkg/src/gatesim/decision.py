"""Midpoint threshold decisions, shared by the attacker and the covert receiver."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class CalibrationError(ValueError):
    """Calibration sets are empty or do not separate (equal or inverted means)."""


@dataclass(frozen=True)
class Threshold:
    tau: float
    mean_low: float
    mean_high: float

    def __post_init__(self):
        if not self.mean_low <= self.tau <= self.mean_high:
            raise ValueError(f"tau {self.tau} outside [{self.mean_low}, {self.mean_high}]")


def calibrate(samples_low: Sequence[float], samples_high: Sequence[float]) -> Threshold:
    """Midpoint between the class means. The low class must have the smaller mean."""
    lo = np.asarray(samples_low, dtype=float)
    hi = np.asarray(samples_high, dtype=float)
    if lo.size == 0 or hi.size == 0:
        raise CalibrationError("calibration needs samples for both classes")
    m_lo, m_hi = float(lo.mean()), float(hi.mean())
    if m_lo == m_hi:
        raise CalibrationError(f"calibration classes do not separate (both means {m_lo})")
    if m_lo > m_hi:
        raise CalibrationError(f"inverted calibration means: low {m_lo} > high {m_hi}")
    return Threshold((m_lo + m_hi) / 2.0, m_lo, m_hi)


def classify(value: float, t: Threshold) -> int:
    """1 iff ``value`` is strictly above ``tau``; ties go to 0."""
    return int(value > t.tau)


def classify_many(values, t: Threshold) -> np.ndarray:
    return (np.asarray(values, dtype=float) > t.tau).astype(np.int64)
