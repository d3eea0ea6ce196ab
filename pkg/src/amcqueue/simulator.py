"""Frame-level Monte Carlo simulation of the AMC transmission queue.

The phase process is simulated event by event inside each frame. Arrivals
are either Poisson with the rate of the phase reached at the end of the frame
(the analytical model's assumption) or the exact BMAP batches generated at
phase transitions. Per-packet sojourn times are tracked with a FIFO of
arrival frames.

Replication ``r`` of a run with seed ``seed`` draws from a generator seeded
with ``SeedSequence(seed, spawn_key=(r,)).generate_state(1)[0]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numba
import numpy as np

from amcqueue.bmap import BmapSpec, stationary_phase_vector
from amcqueue.channel import ChannelModel, RateTable, TransmissionMode, TransmissionModel
from amcqueue.errors import AmcQueueError, StructuralError
from amcqueue.metrics import MetricsReport

METRICS = ("avg_queue_length", "drop_probability", "throughput", "avg_delay_frames")
Z_LIMIT = 3.0
DEFAULT_BATCHES = 20

# accumulator columns: occupancy, arrivals, drops, departures, sojourn, departed
_ARR, _DROP = 1, 2


class ArrivalMode(str, Enum):
    POISSON_PER_PHASE = "poisson_per_phase"
    EXACT_BMAP = "exact_bmap"


@dataclass(frozen=True)
class SimConfig:
    spec: BmapSpec
    X: int
    transmission: TransmissionModel
    channel: ChannelModel = field(default_factory=lambda: ChannelModel.fixed(0))
    table: RateTable = field(default_factory=RateTable.default)
    arrival_mode: ArrivalMode = ArrivalMode.POISSON_PER_PHASE
    frames: int = 100_000
    warmup: int | None = None
    seed: int = 0
    replications: int = 1
    batches: int = DEFAULT_BATCHES

    def __post_init__(self):
        object.__setattr__(self, "arrival_mode", ArrivalMode(self.arrival_mode))
        if self.warmup is None:
            object.__setattr__(self, "warmup", self.frames // 10)
        if not (self.frames > self.warmup >= 0):
            raise StructuralError("need frames > warmup >= 0")
        if self.replications < 1:
            raise StructuralError("replications must be at least 1")
        if self.X < 1:
            raise StructuralError("X must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise StructuralError("seed must be an unsigned 64-bit integer")
        if self.batches < 2 or self.batches > self.frames - self.warmup:
            raise StructuralError("batches must be in [2, frames - warmup]")


@dataclass(frozen=True)
class ReplicationCounts:
    arrivals: int
    departures: int
    drops: int
    initial_occupancy: int
    final_occupancy: int

    @property
    def conserved(self) -> bool:
        return self.arrivals == (self.departures + self.drops
                                 + self.final_occupancy - self.initial_occupancy)


@dataclass(frozen=True)
class SimResult:
    mean: dict
    se: dict
    arrival_mode: ArrivalMode
    replications: int
    post_warmup_frames: int
    arrival_rate: float
    arrival_rate_se: float
    drop_count: int
    arrival_count: int
    sojourn_mean: float
    phase_fractions: np.ndarray
    phase_fractions_se: np.ndarray
    counts: tuple
    se_method: str


def _phase_tables(spec: BmapSpec):
    """Jump tables: for each phase, cumulative probabilities over (batch, next phase)."""
    S, K = spec.S, spec.K
    rates = spec.sojourn_rates
    outcomes = []
    for k in range(K + 1):
        for t in range(S):
            outcomes.append((k, t))
    cum = np.zeros((S, len(outcomes)))
    for s in range(S):
        w = np.array([0.0 if (k == 0 and t == s) else spec.D[k][s, t] for k, t in outcomes])
        w = np.clip(w, 0.0, None)
        total = w.sum()
        cum[s] = np.cumsum(w) / total if total > 0 else 1.0
        cum[s, -1] = 1.0
    batch = np.array([k for k, _ in outcomes], dtype=np.int64)
    target = np.array([t for _, t in outcomes], dtype=np.int64)
    return rates.astype(np.float64), cum, batch, target


@numba.njit(cache=True)
def _draw(cum, u):
    i = 0
    while i < cum.size - 1 and u >= cum[i]:
        i += 1
    return i


@numba.njit(cache=True)
def _simulate(seed, frames, warmup, n_batches, T, X, rates, cum, batch, target, exact,
              init_cum, cap_values, cap_cum, p_success, literal, S):
    np.random.seed(seed)
    acc = np.zeros((n_batches, 6))
    phase_acc = np.zeros((n_batches, S))
    # FIFO ring buffer of (arrival frame, packet count); at most X entries
    q_frame = np.zeros(X + 1, dtype=np.int64)
    q_count = np.zeros(X + 1, dtype=np.int64)
    head = 0
    n_entries = 0
    x = 0
    phase = _draw(init_cum, np.random.random())
    tot_arr = 0
    tot_dep = 0
    tot_drop = 0
    measured = frames - warmup
    per_batch = measured // n_batches
    for f in range(frames):
        b = -1
        if f >= warmup:
            b = (f - warmup) // per_batch
            if b >= n_batches:
                b = n_batches - 1
            acc[b, 0] += x
            phase_acc[b, phase] += 1.0
        # phase evolution over the frame
        arrivals = 0
        t = 0.0
        while rates[phase] > 0.0:
            t += np.random.exponential(1.0 / rates[phase])
            if t > T:
                break
            j = _draw(cum[phase], np.random.random())
            if exact:
                arrivals += batch[j]
            phase = target[j]
        if not exact:
            arrivals = np.random.poisson(rates[phase] * T)
        # transmission, limited by start-of-frame occupancy
        D = cap_values[_draw(cap_cum, np.random.random())]
        limit = min(x, D)
        trials = x if literal else limit
        ok = 0
        for _ in range(trials):
            if np.random.random() < p_success:
                ok += 1
        k = min(ok, limit)
        sojourn = 0
        left = k
        while left > 0:
            take = min(left, q_count[head])
            sojourn += take * (f - q_frame[head])
            q_count[head] -= take
            left -= take
            if q_count[head] == 0:
                head = (head + 1) % (X + 1)
                n_entries -= 1
        y = x - k + arrivals
        drops = y - X if y > X else 0
        accepted = arrivals - drops
        if accepted > 0:
            tail = (head + n_entries) % (X + 1)
            q_frame[tail] = f
            q_count[tail] = accepted
            n_entries += 1
        x = y - drops
        tot_arr += arrivals
        tot_dep += k
        tot_drop += drops
        if b >= 0:
            acc[b, 1] += arrivals
            acc[b, 2] += drops
            acc[b, 3] += k
            acc[b, 4] += sojourn
            acc[b, 5] += k
    return acc, phase_acc, tot_arr, tot_dep, tot_drop, x


def replication_seed(seed: int, replication: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(replication,))
    return int(ss.generate_state(1, np.uint32)[0])


def _metrics_from(acc, frames):
    """Metric values from accumulator sums over ``frames`` frames."""
    arr, drops, dep, soj, ndep = acc[1], acc[2], acc[3], acc[4], acc[5]
    return {
        "avg_queue_length": acc[0] / frames,
        "drop_probability": drops / arr if arr > 0 else 0.0,
        "throughput": dep / frames,
        "avg_delay_frames": soj / ndep if ndep > 0 else 0.0,
        "arrival_rate": arr / frames,
        "avg_dropped_per_frame": drops / frames,
    }


def _mean_se(samples):
    a = np.asarray(samples, dtype=float)
    if a.shape[0] < 2:
        return a.mean(axis=0), np.zeros_like(a[0])
    return a.mean(axis=0), a.std(axis=0, ddof=1) / math.sqrt(a.shape[0])


def run(config: SimConfig) -> SimResult:
    spec = config.spec
    rates, cum, batch, target = _phase_tables(spec)
    init = np.cumsum(stationary_phase_vector(spec))
    init[-1] = 1.0
    caps = config.channel.capacities(config.transmission, config.table)
    cap_values = np.array([d for d, _ in caps], dtype=np.int64)
    cap_cum = np.cumsum([p for _, p in caps])
    cap_cum[-1] = 1.0
    literal = config.transmission.mode is TransmissionMode.PAPER_LITERAL
    measured = config.frames - config.warmup

    per_rep, per_batch, phase_rep, phase_batch, counts = [], [], [], [], []
    totals = np.zeros(6)
    for r in range(config.replications):
        acc, phase_acc, arr, dep, drop, final = _simulate(
            replication_seed(config.seed, r), config.frames, config.warmup, config.batches,
            spec.frame_duration, config.X, rates, cum, batch, target,
            config.arrival_mode is ArrivalMode.EXACT_BMAP, init, cap_values, cap_cum,
            config.transmission.p_success, literal, spec.S,
        )
        counts.append(ReplicationCounts(int(arr), int(dep), int(drop), 0, int(final)))
        rep_sum = acc.sum(axis=0)
        totals += rep_sum
        per_rep.append(_metrics_from(rep_sum, measured))
        phase_rep.append(phase_acc.sum(axis=0) / measured)
        batch_len = measured // config.batches
        batch_frames = np.full(config.batches, batch_len)
        batch_frames[-1] = measured - batch_len * (config.batches - 1)
        per_batch.extend(_metrics_from(a, n) for a, n in zip(acc, batch_frames))
        phase_batch.extend(pa / n for pa, n in zip(phase_acc, batch_frames))

    if config.replications >= 2:
        source, phase_source, method = per_rep, phase_rep, "replications"
    else:
        source, phase_source, method = per_batch, phase_batch, "batch_means"
    keys = list(source[0])
    mean_vec, se_vec = _mean_se([[m[k] for k in keys] for m in source])
    mean = dict(zip(keys, mean_vec.tolist()))
    se = dict(zip(keys, se_vec.tolist()))
    # pooled ratio estimates are less biased than averaged per-run ratios
    pooled = _metrics_from(totals, measured * config.replications)
    mean.update({k: pooled[k] for k in ("drop_probability", "avg_delay_frames")})
    phase_mean, phase_se = _mean_se(phase_source)
    return SimResult(
        mean=mean,
        se=se,
        arrival_mode=config.arrival_mode,
        replications=config.replications,
        post_warmup_frames=measured * config.replications,
        arrival_rate=mean["arrival_rate"],
        arrival_rate_se=se["arrival_rate"],
        drop_count=int(totals[_DROP]),
        arrival_count=int(totals[_ARR]),
        sojourn_mean=pooled["avg_delay_frames"],
        phase_fractions=phase_mean,
        phase_fractions_se=phase_se,
        counts=tuple(counts),
        se_method=method,
    )


class ModeMismatchError(AmcQueueError):
    """Exact-BMAP simulations are not comparable with the analytical model."""


@dataclass(frozen=True)
class MetricComparison:
    metric: str
    analytic: float
    simulated: float
    se: float
    z: float

    @property
    def flagged(self) -> bool:
        return self.z > Z_LIMIT


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple

    @property
    def ok(self) -> bool:
        return not any(r.flagged for r in self.rows)

    @property
    def flagged(self):
        return [r.metric for r in self.rows if r.flagged]

    def __getitem__(self, metric):
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)


def z_score(analytic: float, simulated: float, se: float, resolution: float) -> float:
    """``|analytic - simulated| / se``.

    With a zero standard error (no variation observed, e.g. no drops at all)
    a difference within the estimator's resolution counts as ``z = 0`` and
    anything larger as infinite.
    """
    diff = abs(analytic - simulated)
    if se > 0.0:
        return diff / se
    return 0.0 if diff <= resolution else math.inf


def compare(analytical: MetricsReport, simulated: SimResult) -> ComparisonReport:
    if simulated.arrival_mode is not ArrivalMode.POISSON_PER_PHASE:
        raise ModeMismatchError(
            "only poisson_per_phase simulations follow the analytical arrival model"
        )
    per_frame = 1.0 / simulated.post_warmup_frames
    per_packet = 1.0 / max(simulated.arrival_count, 1)
    resolution = {
        "avg_queue_length": per_frame,
        "drop_probability": per_packet,
        "throughput": per_frame,
        "avg_delay_frames": per_packet,
    }
    rows = []
    for m in METRICS:
        a = float(getattr(analytical, m))
        s, e = simulated.mean[m], simulated.se[m]
        rows.append(MetricComparison(m, a, s, e, z_score(a, s, e, resolution[m])))
    return ComparisonReport(tuple(rows))
