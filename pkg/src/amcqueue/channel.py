"""Adaptive modulation and coding: rate table, per-frame capacity and the
distribution of successfully transmitted packets."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import binom

from amcqueue.errors import StructuralError


@dataclass(frozen=True)
class RateRow:
    rate_id: int
    modulation: str
    bits_per_symbol: float
    snr_threshold_db: float


# IEEE 802.16 profiles: (modulation, information bits/symbol, required SNR dB)
_WIMAX_PROFILES = (
    ("BPSK (1/2)", 0.5, 6.4),
    ("QPSK (1/2)", 1.0, 9.4),
    ("QPSK (3/4)", 1.5, 11.2),
    ("16QAM (1/2)", 2.0, 16.4),
    ("16QAM (3/4)", 3.0, 18.2),
    ("64QAM (2/3)", 4.0, 22.7),
    ("64QAM (3/4)", 4.5, 24.4),
)


@dataclass(frozen=True)
class RateTable:
    rows: tuple

    def __post_init__(self):
        rows = tuple(r if isinstance(r, RateRow) else RateRow(*r) for r in self.rows)
        if not rows:
            raise StructuralError("rate table is empty")
        for i, r in enumerate(rows):
            if r.rate_id != i:
                raise StructuralError(f"row {i} has rate_id {r.rate_id}; ids must be 0..N-1 in order")
            if not r.bits_per_symbol > 0.0:
                raise StructuralError(f"rate {i}: bits_per_symbol must be positive")
        for lo, hi in zip(rows, rows[1:]):
            if not hi.snr_threshold_db > lo.snr_threshold_db:
                raise StructuralError(f"SNR thresholds not strictly increasing at rate {hi.rate_id}")
            if not hi.bits_per_symbol > lo.bits_per_symbol:
                raise StructuralError(f"bits/symbol not strictly increasing at rate {hi.rate_id}")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def default(cls) -> "RateTable":
        return cls(tuple(RateRow(i, *p) for i, p in enumerate(_WIMAX_PROFILES)))

    def __len__(self):
        return len(self.rows)

    @property
    def thresholds(self):
        return [r.snr_threshold_db for r in self.rows]


class TransmissionMode(str, Enum):
    PAPER_LITERAL = "paper_literal"
    ATTEMPTED_ONLY = "attempted_only"


@dataclass(frozen=True)
class TransmissionModel:
    """Per-frame transmission parameters.

    ``bandwidth_b`` is the number of packets a frame carries at rate ID 0.
    ``p_success`` is the per-packet success probability (so the ``theta`` of
    the original formulation corresponds to ``1 - p_success``).
    """

    bandwidth_b: int
    p_success: float = 1.0
    mode: TransmissionMode = TransmissionMode.PAPER_LITERAL

    def __post_init__(self):
        if isinstance(self.bandwidth_b, bool) or int(self.bandwidth_b) != self.bandwidth_b or self.bandwidth_b < 1:
            raise StructuralError(f"bandwidth_b must be a positive integer, got {self.bandwidth_b!r}")
        if not 0.0 < self.p_success <= 1.0:
            raise StructuralError(f"p_success must lie in (0, 1], got {self.p_success!r}")
        object.__setattr__(self, "bandwidth_b", int(self.bandwidth_b))
        object.__setattr__(self, "mode", TransmissionMode(self.mode))


def rate_id_for_snr(gamma_db: float, table: RateTable | None = None):
    """Rate ID used at SNR ``gamma_db``, or ``None`` below the lowest threshold."""
    table = table or RateTable.default()
    n = bisect.bisect_right(table.thresholds, gamma_db) - 1
    return None if n < 0 else n


def capacity_packets(rate_id, model: TransmissionModel, table: RateTable | None = None) -> int:
    """Packets per frame at ``rate_id``: ``floor(b * bits(n) / bits(0))``; 0 in outage."""
    if rate_id is None:
        return 0
    table = table or RateTable.default()
    if not 0 <= rate_id < len(table):
        raise StructuralError(f"rate_id {rate_id} outside table range 0..{len(table) - 1}")
    ratio = table.rows[rate_id].bits_per_symbol / table.rows[0].bits_per_symbol
    # guard against 4.5/0.5 landing a hair under an integer
    return int(math.floor(model.bandwidth_b * ratio + 1e-9))


def transmit_count_pmf(x: int, D: int, model: TransmissionModel) -> np.ndarray:
    """Probabilities ``T_0 .. T_{D'}`` of ``k`` successful transmissions, ``D' = min(x, D)``.

    In ``paper_literal`` mode every one of the ``x`` queued packets is a
    Bernoulli trial and the count is capped at ``D'``. In ``attempted_only``
    mode only ``D'`` packets are tried.
    """
    if x < 0 or D < 0:
        raise ValueError("queue occupancy and capacity must be nonnegative")
    cap = min(x, D)
    p = model.p_success
    if cap == 0:
        return np.ones(1)
    if model.mode is TransmissionMode.ATTEMPTED_ONLY:
        return binom.pmf(np.arange(cap + 1), cap, p)
    out = np.empty(cap + 1)
    out[:cap] = binom.pmf(np.arange(cap), x, p)
    out[cap] = binom.sf(cap - 1, x, p)
    return out


@dataclass(frozen=True)
class ChannelModel:
    """How the rate ID is chosen each frame.

    ``rate_probs`` maps rate IDs (``None`` for outage) to probabilities; rate
    IDs are drawn i.i.d. per frame. Use :meth:`fixed` for a constant rate.
    """

    rate_probs: tuple

    def __post_init__(self):
        items = self.rate_probs.items() if isinstance(self.rate_probs, dict) else self.rate_probs
        items = tuple(sorted(((r, float(p)) for r, p in items if p > 0.0),
                             key=lambda rp: -1 if rp[0] is None else rp[0]))
        if not items:
            raise StructuralError("channel distribution has no positive-probability rate")
        total = sum(p for _, p in items)
        if abs(total - 1.0) > 1e-9:
            raise StructuralError(f"channel rate probabilities sum to {total!r}, expected 1")
        object.__setattr__(self, "rate_probs", items)

    @classmethod
    def fixed(cls, rate_id) -> "ChannelModel":
        return cls(((rate_id, 1.0),))

    def capacities(self, model: TransmissionModel, table: RateTable | None = None):
        """List of ``(capacity, probability)`` pairs."""
        return [(capacity_packets(r, model, table), p) for r, p in self.rate_probs]

    def max_capacity(self, model, table=None) -> int:
        return max(d for d, _ in self.capacities(model, table))


def mixed_transmit_pmf(x: int, capacities, model: TransmissionModel) -> np.ndarray:
    """Transmission pmf averaged over the per-frame capacity distribution."""
    top = min(x, max(d for d, _ in capacities))
    out = np.zeros(top + 1)
    for d, w in capacities:
        pmf = transmit_count_pmf(x, d, model)
        out[: pmf.size] += w * pmf
    return out
