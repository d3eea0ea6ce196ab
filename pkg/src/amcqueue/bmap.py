"""Batch Markovian Arrival Process: validation, stationary analysis and
per-frame arrival kernels.

Rates are stored per unit time. Frame-level quantities (phase transition
matrix, Poisson arrival counts) multiply by the frame duration exactly once,
when the kernel is built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

from amcqueue.errors import IrreducibilityError, StructuralError, TruncationError
from amcqueue.linalg import gth

ROW_SUM_TOL = 1e-9
UNIFORMIZATION_SLACK = 1.001
UNIFORMIZATION_CUTOFF = 1e-14
# Largest Lambda*t evaluated in one uniformization pass; longer spans are squared.
_MAX_UNIFORM_SPAN = 20.0


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BmapSpec:
    """Rate matrices ``D[0] .. D[K]`` of a BMAP and the frame duration.

    ``D[0]`` holds phase changes without arrivals, ``D[k]`` phase changes that
    bring a batch of ``k`` packets. All matrices are ``S x S``.
    """

    D: tuple
    frame_duration: float = 1.0

    def __post_init__(self):
        mats = tuple(_frozen(m) for m in self.D)
        if len(mats) < 2:
            raise StructuralError("a BMAP needs D0 and at least D1 (K >= 1)")
        S = mats[0].shape[0] if mats[0].ndim == 2 else -1
        for k, m in enumerate(mats):
            if m.ndim != 2 or m.shape != (S, S):
                raise StructuralError(
                    f"D{k} has shape {m.shape}, expected ({S}, {S}) like D0"
                )
        if S < 1:
            raise StructuralError("phase count must be positive")
        if not self.frame_duration >= 0.0:
            raise StructuralError("frame_duration must be nonnegative")
        object.__setattr__(self, "D", mats)
        object.__setattr__(self, "frame_duration", float(self.frame_duration))

    @property
    def S(self) -> int:
        return self.D[0].shape[0]

    @property
    def K(self) -> int:
        return len(self.D) - 1

    @property
    def generator(self) -> np.ndarray:
        return np.sum(self.D, axis=0)

    @property
    def sojourn_rates(self) -> np.ndarray:
        """Per-phase rates ``lambda_s = -[D0]_ss``."""
        return -np.diag(self.D[0]).copy()

    def with_frame_duration(self, T: float) -> "BmapSpec":
        return BmapSpec(self.D, T)


def paper_bmap(frame_duration: float = 1.0) -> BmapSpec:
    """Two-phase BMAP with batches of at most two packets used in the numerical study."""
    D0 = [[-2.0, 0.5], [0.125, -1.0]]
    D1 = [[0.5, 0.25], [0.25, 0.25]]
    D2 = [[0.25, 0.5], [0.25, 0.125]]
    return BmapSpec((D0, D1, D2), frame_duration)


@dataclass(frozen=True)
class Violation:
    check: str
    location: tuple
    magnitude: float
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def failed(self, check: str) -> bool:
        return any(v.check == check for v in self.violations)

    def __str__(self):
        if self.ok:
            return "BMAP valid"
        return "\n".join(f"{v.check} at {v.location}: {v.message}" for v in self.violations)


CHECKS = (
    "d0_diagonal_negative",
    "d0_offdiagonal_nonnegative",
    "batch_nonnegative",
    "generator_row_sums",
    "arrivals_occur",
    "irreducible",
)


def validate(spec: BmapSpec) -> ValidationReport:
    """Check every BMAP invariant and list the failures.

    Violations are collected rather than raised; the caller decides which ones
    are fatal. Shape problems are already rejected by :class:`BmapSpec`.
    """
    out = []
    D0 = spec.D[0]
    for s in range(spec.S):
        if not D0[s, s] < 0.0:
            out.append(Violation("d0_diagonal_negative", (0, s, s), float(D0[s, s]),
                                 f"[D0]_{s}{s} = {D0[s, s]!r} is not strictly negative"))
    off = ~np.eye(spec.S, dtype=bool)
    for s, t in zip(*np.nonzero((D0 < 0.0) & off)):
        out.append(Violation("d0_offdiagonal_nonnegative", (0, int(s), int(t)), float(-D0[s, t]),
                             f"[D0]_{s}{t} = {D0[s, t]!r} is negative"))
    for k in range(1, spec.K + 1):
        for s, t in zip(*np.nonzero(spec.D[k] < 0.0)):
            out.append(Violation("batch_nonnegative", (k, int(s), int(t)), float(-spec.D[k][s, t]),
                                 f"[D{k}]_{s}{t} = {spec.D[k][s, t]!r} is negative"))
    rows = spec.generator.sum(axis=1)
    for s in np.flatnonzero(np.abs(rows) > ROW_SUM_TOL):
        out.append(Violation("generator_row_sums", (int(s),), float(abs(rows[s])),
                             f"row {s} of D sums to {rows[s]!r}"))
    batches = np.sum(spec.D[1:], axis=0)
    if not np.any(batches != 0.0):
        out.append(Violation("arrivals_occur", (), 0.0, "D1..DK are all zero, no arrivals occur"))
    unreachable = _unreachable_phases(spec)
    if unreachable:
        out.append(Violation("irreducible", tuple(unreachable), float(len(unreachable)),
                             f"phases {unreachable} do not communicate with phase 0"))
    return ValidationReport(tuple(out))


def _reach(adj, start=0):
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    frontier = seen.copy()
    while frontier.any():
        frontier = adj[frontier].any(axis=0) & ~seen
        seen |= frontier
    return seen


def _unreachable_phases(spec):
    """Phases outside the communicating class of phase 0."""
    adj = spec.generator > 0.0
    np.fill_diagonal(adj, False)
    both = _reach(adj) & _reach(adj.T)
    return [int(s) for s in np.flatnonzero(~both)]


def stationary_phase_vector(spec: BmapSpec) -> np.ndarray:
    """Solve ``pi D = 0, pi e = 1`` for the phase process."""
    if spec.S == 1:
        return np.ones(1)
    unreachable = _unreachable_phases(spec)
    if unreachable:
        raise IrreducibilityError(
            f"phase generator is reducible; phases {unreachable} do not communicate with phase 0",
            unreachable,
        )
    G = spec.generator
    rate = float(np.max(-np.diag(G)))
    P = np.eye(spec.S) + G / rate
    return gth(P)


def mean_arrival_rate(spec: BmapSpec) -> float:
    """Mean packets per unit time, ``pi sum_k k D_k e``."""
    pi = stationary_phase_vector(spec)
    weighted = sum(k * spec.D[k] for k in range(1, spec.K + 1))
    return float(pi @ weighted.sum(axis=1))


def phase_arrival_rates(spec: BmapSpec) -> np.ndarray:
    """Mean packets per unit time generated while in each phase."""
    weighted = sum(k * spec.D[k] for k in range(1, spec.K + 1))
    return weighted.sum(axis=1)


def uniformized_expm(Q, t: float) -> np.ndarray:
    """``exp(Q t)`` for a generator ``Q`` via uniformization.

    Poisson-weighted powers of ``I + Q / Lambda`` are summed until the
    cumulative weight exceeds ``1 - 1e-14``. Long spans are split and squared
    so the leading weight never underflows.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if t == 0.0:
        return np.eye(n)
    Lam = float(np.max(-np.diag(Q))) * UNIFORMIZATION_SLACK
    if Lam == 0.0:
        return np.eye(n)
    squarings = 0
    span = Lam * t
    while span > _MAX_UNIFORM_SPAN:
        span /= 2.0
        squarings += 1
    P = np.eye(n) + Q / Lam
    P[P < 0.0] = 0.0  # rounding on the diagonal only
    weight = np.exp(-span)
    cumulative = weight
    term = np.eye(n)
    out = weight * term
    k = 0
    while cumulative <= 1.0 - UNIFORMIZATION_CUTOFF:
        k += 1
        term = term @ P
        weight *= span / k
        cumulative += weight
        out += weight * term
        if k > 10_000:
            break
    for _ in range(squarings):
        out = out @ out
    return out


def phase_transition_matrix(spec: BmapSpec) -> np.ndarray:
    """Phase transition probabilities over one frame, ``exp(D T)``."""
    return uniformized_expm(spec.generator, spec.frame_duration)


@dataclass(frozen=True)
class FrameArrivalKernel:
    """Per-frame building blocks derived from a BMAP.

    ``probs[a, s]`` is the probability of ``a`` Poisson arrivals in a frame
    spent in phase ``s``; ``tail[s]`` is the mass beyond ``A``.
    """

    phi: np.ndarray
    probs: np.ndarray
    tail: np.ndarray
    er: float
    means: np.ndarray = field(default=None)

    @property
    def A(self) -> int:
        return self.probs.shape[0] - 1

    @property
    def S(self) -> int:
        return self.probs.shape[1]

    @property
    def xi(self) -> np.ndarray:
        """The diagonal matrices ``xi_0 .. xi_A`` stacked along axis 0."""
        out = np.zeros((self.A + 1, self.S, self.S))
        idx = np.arange(self.S)
        out[:, idx, idx] = self.probs
        return out

    @property
    def tail_mass(self) -> float:
        return float(self.tail.max())

    def lumped_probs(self) -> np.ndarray:
        """Arrival pmf with the truncated tail assigned to ``a = A``."""
        p = self.probs.copy()
        p[-1] += self.tail
        return p


def default_truncation_cap(means) -> int:
    return int(10.0 * float(np.max(means, initial=0.0)) + 50)


def arrival_count_matrices(spec: BmapSpec, er: float, cap: int | None = None) -> FrameArrivalKernel:
    """Poisson per-phase arrival counts over one frame, truncated at ``A``.

    ``A`` is the smallest bound (at least ``K``) whose tail ``P(a > A)`` is
    below ``er`` in every phase.
    """
    if not 0.0 < er < 1.0:
        raise ValueError(f"er must lie in (0, 1), got {er!r}")
    means = spec.sojourn_rates * spec.frame_duration
    if np.any(means < 0.0):
        raise StructuralError("D0 has a positive diagonal entry; Poisson rates must be nonnegative")
    if cap is None:
        cap = default_truncation_cap(means)
    A = 0
    while np.any(poisson.sf(A, means) >= er):
        A += 1
        if A > cap:
            raise TruncationError(
                f"arrival bound would exceed the cap {cap} for er={er!r}; raise the cap or er"
            )
    A = max(A, spec.K)
    a = np.arange(A + 1)[:, None]
    probs = poisson.pmf(a, means[None, :])
    tail = poisson.sf(A, means)
    return FrameArrivalKernel(
        phi=_frozen(phase_transition_matrix(spec)),
        probs=_frozen(probs),
        tail=_frozen(tail),
        er=float(er),
        means=_frozen(means),
    )


def scale_intensity(spec: BmapSpec, rho: float) -> BmapSpec:
    """Multiply every rate matrix by ``rho``; the arrival rate scales by ``rho``."""
    if not rho > 0.0:
        raise ValueError(f"intensity factor must be positive, got {rho!r}")
    return BmapSpec(tuple(rho * m for m in spec.D), spec.frame_duration)
