"""Timing transmission channel: network noise, timer coarsening, batched decoding.

A sender encodes bit 1 by making the receiver-visible response ``delta``
cycles slower than for bit 0. The receiver averages ``trials_per_bit``
noisy, quantized response times and compares the mean against a threshold
learned from a preamble.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .decision import Threshold, classify
from .power_gate import DEFAULT_FREQUENCY_HZ
from .stats import normal_quantile, normal_tail_q


@dataclass(frozen=True)
class GapSource:
    name: str
    delta: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError(f"gap must be > 0, got {self.delta}")


AMX = GapSource("amx", 20_000)
AVX512 = GapSource("avx512", 150)


def custom_source(delta: float) -> GapSource:
    return GapSource("custom", delta)


def get_source(name: str, delta: float | None = None) -> GapSource:
    if name == "amx":
        return AMX
    if name == "avx512":
        return AVX512
    if name == "custom":
        if delta is None:
            raise ValueError("custom source needs a delta")
        return custom_source(delta)
    raise ValueError(f"unknown gap source {name!r} (amx, avx512, custom)")


NOISE_PRESETS = {"none": 0.0, "localhost": 3_000.0, "one_hop": 30_000.0}


@dataclass(frozen=True)
class ChannelConfig:
    """``sigma`` and ``base_latency`` are in cycles, ``timer_resolution`` and
    ``round_time`` in seconds (resolution 0 means an exact timer)."""

    sigma: float = 0.0
    timer_resolution: float = 0.0
    trials_per_bit: int = 1000
    round_time: float = 0.015
    source: GapSource = AMX
    frequency: float = DEFAULT_FREQUENCY_HZ
    base_latency: int = 1_000_000

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.trials_per_bit < 1:
            raise ValueError("trials_per_bit must be >= 1")
        if self.frequency <= 0:
            raise ValueError("frequency must be > 0")
        if self.timer_resolution < 0 or self.round_time <= 0:
            raise ValueError("timer_resolution must be >= 0 and round_time > 0")

    @classmethod
    def preset(cls, name: str, **kw) -> "ChannelConfig":
        try:
            sigma = NOISE_PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown noise preset {name!r}; choose from {sorted(NOISE_PRESETS)}") from None
        return cls(sigma=sigma, **kw)

    @property
    def delta(self) -> float:
        return self.source.delta

    @property
    def quantum_cycles(self) -> float:
        return timer_quantum(self.timer_resolution, self.frequency)


@dataclass
class BitTransmission:
    bit: int
    samples: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.samples.mean())


def timer_quantum(resolution: float, frequency: float) -> float:
    # round away float noise like 5e-6 * 2e9 = 9999.999999999998
    return float(np.round(resolution * frequency, 6))


def quantize(values, resolution: float, frequency: float) -> np.ndarray:
    """Floor cycle counts onto the timer grid; resolution 0 leaves values untouched."""
    v = np.asarray(values, dtype=float)
    if resolution <= 0:
        return v
    q = timer_quantum(resolution, frequency)
    return np.floor(v / q) * q


def apply_noise(values, cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian noise, clamped at zero, then timer quantization."""
    v = np.asarray(values, dtype=float)
    if cfg.sigma > 0:
        v = v + rng.normal(0.0, cfg.sigma, v.shape)
    v = np.maximum(v, 0.0)
    return quantize(v, cfg.timer_resolution, cfg.frequency)


def transmit_bit(bit: int, base_low: float, cfg: ChannelConfig, rng: np.random.Generator) -> BitTransmission:
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    clean = np.full(cfg.trials_per_bit, base_low + bit * cfg.delta, dtype=float)
    return BitTransmission(bit, apply_noise(clean, cfg, rng))


def decode_bit(tx: BitTransmission, t: Threshold) -> int:
    return classify(tx.mean, t)


@dataclass(frozen=True)
class Preamble:
    """Receiver threshold learned from known 0/1 preamble blocks.

    ``inverted`` is set when the 1-block averaged lower than the 0-block; the
    receiver then flips its decisions.
    """

    threshold: Threshold
    inverted: bool = False

    def decode(self, tx: BitTransmission) -> int:
        return decode_bit(tx, self.threshold) ^ int(self.inverted)


def preamble(cfg: ChannelConfig, rng: np.random.Generator, base_low: float | None = None) -> Preamble:
    base = cfg.base_latency if base_low is None else base_low
    m0 = transmit_bit(0, base, cfg, rng).mean
    m1 = transmit_bit(1, base, cfg, rng).mean
    lo, hi = min(m0, m1), max(m0, m1)
    return Preamble(Threshold((lo + hi) / 2.0, lo, hi), inverted=m1 < m0)


def to_bits(message: bytes) -> list[int]:
    return [(byte >> (7 - i)) & 1 for byte in message for i in range(8)]


def from_bits(bits: Sequence[int]) -> bytes:
    out = bytearray()
    for i in range(0, len(bits) - len(bits) % 8, 8):
        byte = 0
        for b in bits[i:i + 8]:
            byte = (byte << 1) | int(b)
        out.append(byte)
    return bytes(out)


@dataclass
class MessageResult:
    message: bytes
    decoded: bytes
    sent_bits: list[int]
    received_bits: list[int]
    trials_per_bit: int
    transmissions: list[BitTransmission] = field(repr=False, default_factory=list)

    @property
    def bit_errors(self) -> int:
        return sum(a != b for a, b in zip(self.sent_bits, self.received_bits))

    @property
    def ber(self) -> float:
        return self.bit_errors / len(self.sent_bits)

    def __iter__(self):
        # unpacks as (decoded, ber)
        return iter((self.decoded, self.ber))

    def to_dict(self) -> dict:
        return {
            "message": self.message.decode("latin-1"),
            "decoded": self.decoded.decode("latin-1"),
            "ber": self.ber,
            "bits": len(self.sent_bits),
            "trials_per_bit": self.trials_per_bit,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"


def transmit_bits(bits: Sequence[int], cfg: ChannelConfig, rng: np.random.Generator) -> tuple[list[int], list[BitTransmission]]:
    pre = preamble(cfg, rng)
    txs = [transmit_bit(int(b), cfg.base_latency, cfg, rng) for b in bits]
    return [pre.decode(tx) for tx in txs], txs


def transmit_message(message: bytes | str, cfg: ChannelConfig, rng: np.random.Generator) -> MessageResult:
    """Send ``message`` MSB-first, one batched transmission per bit."""
    if isinstance(message, str):
        message = message.encode("latin-1")
    if not message:
        raise ValueError("message must be non-empty")
    sent = to_bits(message)
    received, txs = transmit_bits(sent, cfg, rng)
    return MessageResult(message, from_bits(received), sent, received, cfg.trials_per_bit, txs)


def histogram_csv(transmissions: Iterable[BitTransmission]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bit_index", "sample_cycles"])
    for i, tx in enumerate(transmissions):
        for s in tx.samples.tolist():
            w.writerow([i, repr(float(s))])
    return buf.getvalue()


def analytic_bit_error(delta: float, sigma: float, n: int) -> float:
    """Error of mean-of-``n`` decoding at the midpoint threshold, equal-variance Gaussians."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return 0.0
    return normal_tail_q(delta * math.sqrt(n) / (2.0 * sigma))


def _delta(source: GapSource | float) -> float:
    return source.delta if isinstance(source, GapSource) else float(source)


def noise_resilience(source: GapSource | float, n: int, confidence: float = 0.99) -> float:
    """Largest noise sigma at which per-bit decoding still meets ``confidence``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = normal_quantile(confidence)
    return _delta(source) * math.sqrt(n) / (2.0 * z)


def bandwidth(cfg: ChannelConfig) -> float:
    return 1.0 / (cfg.trials_per_bit * cfg.round_time)


def min_suppressing_resolution(source: GapSource | float, frequency: float = DEFAULT_FREQUENCY_HZ) -> float:
    """Timer resolution (seconds) equal to the gap: any coarser grid hides it inside one quantum."""
    return _delta(source) / frequency


def monte_carlo_bit_error(delta: float, sigma: float, n: int, reps: int, rng: np.random.Generator,
                          base_low: float = 1_000_000.0, timer_resolution: float = 0.0,
                          frequency: float = DEFAULT_FREQUENCY_HZ) -> float:
    """Empirical decode error: each repetition sends one 0 and one 1 and decodes
    both against the true midpoint ``base_low + delta / 2``."""
    cfg = ChannelConfig(sigma=sigma, timer_resolution=timer_resolution, trials_per_bit=n,
                        source=GapSource("mc", delta), frequency=frequency)
    t = Threshold(base_low + delta / 2.0, base_low, base_low + delta)
    errors = 0
    chunk = max(1, 2_000_000 // n)
    for lo in range(0, reps, chunk):
        m = min(chunk, reps - lo)
        for bit in (0, 1):
            clean = np.full((m, n), base_low + bit * delta)
            means = apply_noise(clean, cfg, rng).mean(axis=1)
            errors += int(np.count_nonzero((means > t.tau).astype(int) != bit))
    return errors / (2 * reps)


def resilience_sweep(source: GapSource, n: int, sigmas: Sequence[float], reps: int,
                     rng: np.random.Generator) -> list[tuple[float, float]]:
    """Decode accuracy vs. noise sigma, rows ``(sigma, accuracy)``."""
    return [(float(s), 1.0 - monte_carlo_bit_error(source.delta, s, n, reps, rng)) for s in sigmas]


def resilience_csv(rows: Iterable[tuple[float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sigma_cycles", "accuracy"])
    for s, a in rows:
        w.writerow([f"{s:.1f}", f"{a:.6f}"])
    return buf.getvalue()


def with_source(cfg: ChannelConfig, source: GapSource) -> ChannelConfig:
    return replace(cfg, source=source)
