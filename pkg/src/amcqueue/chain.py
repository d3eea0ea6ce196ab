"""Joint (queue occupancy, arrival phase) Markov chain observed at frame
boundaries, and its stationary distribution.

State ``(x, s)`` has flat index ``x * S + s``. Over one frame the phase moves
by the frame transition matrix, then ``a`` packets arrive and ``k`` depart,
with ``k`` limited by the occupancy at the start of the frame. Arrivals that
would push the queue past ``X`` are dropped, so their probability mass is
folded onto the full-buffer level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from amcqueue.bmap import FrameArrivalKernel
from amcqueue.channel import ChannelModel, RateTable, TransmissionModel, mixed_transmit_pmf
from amcqueue.errors import ConstructionError, IrreducibilityError, NonConvergenceError, StructuralError
from amcqueue.linalg import closed_classes, gth

ROW_SUM_ERROR = 1e-8
GTH_MAX_STATES = 2000
POWER_TOL = 1e-12
POWER_MAX_ITER = 1_000_000


@dataclass(frozen=True)
class QueueChainSpec:
    X: int
    kernel: FrameArrivalKernel
    transmission: TransmissionModel
    channel: ChannelModel = field(default_factory=lambda: ChannelModel.fixed(0))
    table: RateTable = field(default_factory=RateTable.default)

    def __post_init__(self):
        if int(self.X) != self.X or self.X < 1:
            raise StructuralError(f"queue capacity X must be a positive integer, got {self.X!r}")
        if self.kernel.A < 1:
            raise StructuralError("arrival bound A must be at least 1")

    @property
    def S(self) -> int:
        return self.kernel.S

    @property
    def capacities(self):
        return self.channel.capacities(self.transmission, self.table)

    @property
    def max_capacity(self) -> int:
        return max(d for d, _ in self.capacities)

    def service_pmf(self, x: int) -> np.ndarray:
        return mixed_transmit_pmf(x, self.capacities, self.transmission)


@dataclass(frozen=True)
class TransitionMatrix:
    """Folded transition matrix plus the unfolded upward blocks.

    ``upper[x, v]`` is the ``S x S`` block for a net increase of ``v``
    packets from level ``x`` before any dropping; the drop computation needs
    these for the levels whose increases overshoot ``X``.
    """

    M: sparse.csr_matrix
    X: int
    S: int
    A: int
    upper: np.ndarray
    spec: QueueChainSpec

    @property
    def n_states(self) -> int:
        return (self.X + 1) * self.S

    def block(self, x: int, y: int) -> np.ndarray:
        S = self.S
        return self.M[x * S:(x + 1) * S, y * S:(y + 1) * S].toarray()

    def dense(self) -> np.ndarray:
        return self.M.toarray()

    def dump_triplets(self, path) -> None:
        """Write nonzero entries as ``row col value`` lines (17 significant digits)."""
        coo = self.M.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            for i in order:
                fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")


def net_change_blocks(spec: QueueChainSpec, x: int):
    """Unfolded blocks for every net change ``n = a - k`` from level ``x``.

    Returns ``(lowest_n, blocks)`` with ``blocks[j]`` the block for
    ``n = lowest_n + j``.
    """
    phi = spec.kernel.phi
    arrivals = spec.kernel.lumped_probs()
    service = spec.service_pmf(x)
    top = service.size - 1
    # column l: distribution of a - k + top for arrivals in (new) phase l
    net = np.stack([np.convolve(arrivals[:, l], service[::-1]) for l in range(spec.S)], axis=1)
    return -top, phi[None, :, :] * net[:, None, :]


def build_transition_matrix(spec: QueueChainSpec) -> TransitionMatrix:
    X, S, A = spec.X, spec.S, spec.kernel.A
    rows, cols, vals = [], [], []
    upper = np.zeros((X + 1, A + 1, S, S))
    ss_r, ss_c = np.meshgrid(np.arange(S), np.arange(S), indexing="ij")
    for x in range(X + 1):
        lo, blocks = net_change_blocks(spec, x)
        targets = x + lo + np.arange(blocks.shape[0])
        up = targets >= x
        upper[x, : int(up.sum())] = blocks[up]
        folded = np.minimum(targets, X)
        level_blocks = np.zeros((X + 1 - (x + lo), S, S))
        np.add.at(level_blocks, folded - (x + lo), blocks)
        for j, blk in enumerate(level_blocks):
            y = x + lo + j
            nz = blk != 0.0
            rows.append((x * S + ss_r)[nz])
            cols.append((y * S + ss_c)[nz])
            vals.append(blk[nz])
    n = (X + 1) * S
    M = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    M.sum_duplicates()
    sums = np.asarray(M.sum(axis=1)).ravel()
    deficit = 1.0 - sums
    worst = int(np.argmax(np.abs(deficit)))
    if abs(deficit[worst]) > ROW_SUM_ERROR:
        raise ConstructionError(
            f"row {worst} (x={worst // S}, s={worst % S}) sums to {sums[worst]!r}",
            row=worst,
            deficit=float(deficit[worst]),
        )
    return TransitionMatrix(M=M, X=X, S=S, A=A, upper=upper, spec=spec)


@dataclass(frozen=True)
class StationaryDistribution:
    pi: np.ndarray  # shape (X + 1, S)
    residual: float
    method: str = "gth"

    @property
    def X(self) -> int:
        return self.pi.shape[0] - 1

    @property
    def S(self) -> int:
        return self.pi.shape[1]


def _recurrent_class(M):
    classes = closed_classes(M)
    if len(classes) != 1:
        extra = classes[1]
        raise IrreducibilityError(
            f"chain has {len(classes)} closed classes; state {int(extra[0])} "
            "cannot reach the first class",
            extra,
        )
    return classes[0]


def _power_iteration(P, start, tol=POWER_TOL, max_iter=POWER_MAX_ITER):
    PT = P.T.tocsr()
    pi = start
    diff = np.inf
    for _ in range(max_iter):
        nxt = PT @ pi
        nxt /= nxt.sum()
        diff = float(np.max(np.abs(nxt - pi)))
        pi = nxt
        if diff < tol:
            return pi
    raise NonConvergenceError(
        f"power iteration did not converge in {max_iter} steps (last change {diff:.3e})",
        residual=diff,
    )


def solve_stationary(tm, method: str = "auto") -> StationaryDistribution:
    """Solve ``pi M = pi, pi 1 = 1``.

    States outside the single closed class (possible when the queue can only
    drain) get probability zero. Two or more closed classes are rejected.
    """
    if isinstance(tm, TransitionMatrix):
        M, X, S = tm.M, tm.X, tm.S
    else:
        M = sparse.csr_matrix(np.asarray(tm, dtype=float))
        X, S = M.shape[0] - 1, 1
    n = M.shape[0]
    closed = _recurrent_class(M)
    sub = M[closed][:, closed]
    if method == "auto":
        method = "gth" if closed.size <= GTH_MAX_STATES else "power"
    if method == "gth":
        part = gth(sub.toarray()) if closed.size > 1 else np.ones(1)
    elif method == "power":
        part = _power_iteration(sub, np.full(closed.size, 1.0 / closed.size))
    else:
        raise ValueError(f"unknown method {method!r}")
    pi = np.zeros(n)
    pi[closed] = part
    residual = float(np.max(np.abs(M.T @ pi - pi)))
    return StationaryDistribution(pi.reshape(X + 1, S), residual, method)


def extract_marginals(dist: StationaryDistribution):
    """Queue-length pmf (length ``X + 1``) and phase pmf (length ``S``)."""
    return dist.pi.sum(axis=1), dist.pi.sum(axis=0)
