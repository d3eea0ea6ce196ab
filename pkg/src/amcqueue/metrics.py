"""QoS metrics from the stationary distribution of the queue chain."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from amcqueue.bmap import BmapSpec, arrival_count_matrices, mean_arrival_rate
from amcqueue.chain import (
    QueueChainSpec,
    StationaryDistribution,
    TransitionMatrix,
    build_transition_matrix,
    solve_stationary,
)
from amcqueue.channel import ChannelModel, RateTable, TransmissionModel
from amcqueue.errors import ConsistencyError, IrreducibilityError, StructuralError, UndefinedDelayError

DROP_PROB_SLACK = 1e-9


@dataclass(frozen=True)
class MetricsReport:
    """Analytical QoS figures for one configuration.

    ``lambda_frame`` is the mean number of packets per frame the chain is
    actually offered (Poisson rate of the current phase, averaged over the
    stationary phase law). ``lambda_bmap_frame`` is the BMAP mean rate times
    the frame duration; the two differ whenever a phase's sojourn rate is not
    its arrival rate.
    """

    avg_queue_length: float
    avg_dropped_per_frame: float
    drop_probability: float
    throughput: float
    avg_delay_frames: float
    lambda_frame: float
    lambda_bmap_frame: float = float("nan")
    frame_duration: float = 1.0

    @property
    def avg_delay_seconds(self) -> float:
        return self.avg_delay_frames * self.frame_duration

    def as_dict(self) -> dict:
        return asdict(self)


def average_queue_length(dist: StationaryDistribution) -> float:
    q = dist.pi.sum(axis=1)
    return float(np.arange(q.size) @ q)


def offered_load(dist: StationaryDistribution, tm: TransitionMatrix) -> float:
    """Mean arrivals per frame seen by the chain (truncated tail lumped at ``A``)."""
    kernel = tm.spec.kernel
    per_phase = np.arange(kernel.A + 1) @ kernel.lumped_probs()
    return float(dist.pi.sum(axis=0) @ kernel.phi @ per_phase)


def average_dropped_per_frame(dist: StationaryDistribution, tm: TransitionMatrix) -> float:
    """Expected overshoot past ``X`` per frame, from the unfolded increase blocks."""
    if tm.upper is None:
        raise StructuralError("transition matrix was built without its unfolded blocks")
    X, A = tm.X, tm.A
    total = 0.0
    for x in range(max(0, X - A + 1), X + 1):
        v = np.arange(X - x + 1, A + 1)
        if v.size == 0:
            continue
        row_mass = tm.upper[x, v].sum(axis=2)  # (len(v), S)
        total += float(((v - (X - x)) @ row_mass) @ dist.pi[x])
    return total


def drop_probability(dropped_per_frame: float, lambda_frame: float) -> float:
    if lambda_frame <= 0.0:
        if dropped_per_frame == 0.0:
            return 0.0
        raise ConsistencyError("packets dropped with zero offered load")
    p = dropped_per_frame / lambda_frame
    if not -DROP_PROB_SLACK <= p <= 1.0 + DROP_PROB_SLACK:
        raise ConsistencyError(f"drop probability {p!r} outside [0, 1]")
    return p


def throughput(lambda_frame: float, p_drop: float) -> float:
    return lambda_frame * (1.0 - p_drop)


def average_delay(avg_queue_length: float, phi: float) -> float:
    """Little's law, in frames. An empty system with no traffic has zero delay."""
    if phi == 0.0:
        if avg_queue_length == 0.0:
            return 0.0
        raise UndefinedDelayError("zero throughput with a nonempty queue; delay is unbounded")
    return avg_queue_length / phi


def departure_throughput(dist: StationaryDistribution, spec: QueueChainSpec) -> float:
    """Expected successful transmissions per frame, ``sum_x q(x) E[k | x]``."""
    q = dist.pi.sum(axis=1)
    means = np.array([np.arange(p.size) @ p for p in map(spec.service_pmf, range(q.size))])
    return float(q @ means)


def metrics_report(dist, tm, lambda_bmap_frame=float("nan"), frame_duration=1.0) -> MetricsReport:
    xbar = average_queue_length(dist)
    lam = offered_load(dist, tm)
    dropped = average_dropped_per_frame(dist, tm)
    p = drop_probability(dropped, lam)
    phi = throughput(lam, p)
    return MetricsReport(
        avg_queue_length=xbar,
        avg_dropped_per_frame=dropped,
        drop_probability=p,
        throughput=phi,
        avg_delay_frames=average_delay(xbar, phi),
        lambda_frame=lam,
        lambda_bmap_frame=lambda_bmap_frame,
        frame_duration=frame_duration,
    )


@dataclass(frozen=True)
class Analysis:
    report: MetricsReport
    matrix: TransitionMatrix
    dist: StationaryDistribution


def analyze(
    bmap: BmapSpec,
    X: int,
    transmission: TransmissionModel,
    channel: ChannelModel | None = None,
    er: float = 1e-9,
    table: RateTable | None = None,
) -> Analysis:
    """Build, solve and summarize the chain for one configuration."""
    kernel = arrival_count_matrices(bmap, er)
    spec = QueueChainSpec(
        X=X,
        kernel=kernel,
        transmission=transmission,
        channel=channel or ChannelModel.fixed(0),
        table=table or RateTable.default(),
    )
    tm = build_transition_matrix(spec)
    dist = solve_stationary(tm)
    try:
        lam_bmap = mean_arrival_rate(bmap) * bmap.frame_duration
    except IrreducibilityError:
        lam_bmap = float("nan")
    report = metrics_report(dist, tm, lam_bmap, bmap.frame_duration)
    return Analysis(report, tm, dist)
