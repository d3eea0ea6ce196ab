"""Small dense Markov-chain helpers shared by the BMAP and queue modules."""

import numpy as np
from scipy.sparse import csr_matrix, issparse
from scipy.sparse.csgraph import connected_components


def gth(P):
    """Stationary vector of an irreducible row-stochastic matrix by GTH elimination.

    Only off-diagonal entries are used, so the result does not suffer from
    cancellation in ``1 - P[i, i]``.
    """
    A = np.array(P, dtype=float, copy=True)
    n = A.shape[0]
    np.fill_diagonal(A, 0.0)
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0.0:
            raise ZeroDivisionError(f"state {k} has no transitions into lower states")
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
        np.fill_diagonal(A[:k, :k], 0.0)
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def _graph(pattern):
    if issparse(pattern):
        g = csr_matrix(pattern, copy=True)
        g.eliminate_zeros()
        g.data[:] = 1.0
        return g
    return csr_matrix(np.asarray(pattern) != 0)


def closed_classes(pattern):
    """Return the closed (recurrent) communicating classes as sorted index arrays."""
    adj = _graph(pattern)
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    coo = adj.tocoo()
    leaks = np.zeros(n_comp, dtype=bool)
    cross = labels[coo.row] != labels[coo.col]
    leaks[labels[coo.row[cross]]] = True
    return [np.flatnonzero(labels == c) for c in range(n_comp) if not leaks[c]]
