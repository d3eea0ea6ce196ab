"""Finite-buffer AMC transmission queue with BMAP arrivals.

Analytical discrete-time Markov chain model, QoS metrics and a frame-level
Monte Carlo simulator for cross-checking them.
"""

from amcqueue.bmap import (
    BmapSpec,
    FrameArrivalKernel,
    arrival_count_matrices,
    mean_arrival_rate,
    paper_bmap,
    phase_transition_matrix,
    scale_intensity,
    stationary_phase_vector,
    validate,
)
from amcqueue.channel import (
    ChannelModel,
    RateTable,
    TransmissionModel,
    capacity_packets,
    rate_id_for_snr,
    transmit_count_pmf,
)
from amcqueue.chain import (
    QueueChainSpec,
    StationaryDistribution,
    TransitionMatrix,
    build_transition_matrix,
    extract_marginals,
    solve_stationary,
)
from amcqueue.metrics import MetricsReport, analyze

__all__ = [
    "BmapSpec",
    "ChannelModel",
    "FrameArrivalKernel",
    "MetricsReport",
    "QueueChainSpec",
    "RateTable",
    "StationaryDistribution",
    "TransitionMatrix",
    "TransmissionModel",
    "analyze",
    "arrival_count_matrices",
    "build_transition_matrix",
    "capacity_packets",
    "extract_marginals",
    "mean_arrival_rate",
    "paper_bmap",
    "phase_transition_matrix",
    "rate_id_for_snr",
    "scale_intensity",
    "solve_stationary",
    "stationary_phase_vector",
    "transmit_count_pmf",
    "validate",
]
