"""Numerical helpers shared by the attack and channel models.

Random streams are numpy ``Generator`` objects seeded through ``SeedSequence``
spawn keys, so ``make_rng(seed, scenario, worker, trial)`` always yields the
same sequence regardless of which worker draws it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable, Sequence

import numpy as np

_STD_NORMAL = NormalDist()
_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based substream: one independent generator per ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


def gaussian(rng: np.random.Generator, sigma: float, size=None) -> np.ndarray:
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    return rng.normal(0.0, sigma, size) if sigma > 0 else np.zeros(size if size is not None else ())


def mean_var(samples: Sequence[float]) -> tuple[float, float]:
    """Sample mean and unbiased variance (variance 0 for a single sample)."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("mean_var of empty sample")
    var = float(arr.var(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), var


def normal_tail_q(x: float) -> float:
    """Upper tail of the standard normal, ``P(Z > x)``."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF for ``0 < p < 1``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile probability must lie in (0, 1), got {p}")
    return _STD_NORMAL.inv_cdf(p)


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if len(self.counts) != len(self.bin_edges) - 1:
            raise ValueError("counts must have one entry fewer than bin_edges")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def histogram(samples: Iterable[float], bins: int) -> Histogram:
    """Equal-width histogram over ``[min, max]``; the max sample lands in the last bin.

    A constant sample gets a unit-width range starting at the sample value.
    """
    arr = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=float)
    if arr.size == 0:
        raise ValueError("histogram of empty sample")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        hi = lo + 1.0
    counts, edges = np.histogram(arr, bins=bins, range=(lo, hi))
    return Histogram(edges, counts.astype(np.int64))


def roc_curve(scores: Sequence[float], truth: Sequence[int]) -> tuple[list[tuple[float, float]], float]:
    """ROC points ``(fpr, tpr)`` over every distinct score threshold, plus trapezoid AUC.

    Higher scores indicate the positive class. Tied scores move together, so a
    block of ties contributes a diagonal segment.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(truth).astype(bool)
    if s.shape != y.shape:
        raise ValueError("scores and truth must have equal length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_curve needs both classes present")

    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # keep the last index of each run of equal scores
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tpr = np.r_[0.0, tp[last] / n_pos]
    fpr = np.r_[0.0, fp[last] / n_neg]
    auc = float(_trapezoid(tpr, fpr))
    return list(zip(fpr.tolist(), tpr.tolist())), auc
