"""Independent reference computations used by the tests.

Everything here is written with plain loops and the standard library so that
it shares no code path with the package under test.
"""

import math

import numpy as np


def taylor_expm(Q, t, cutoff=1e-14):
    Q = np.asarray(Q, dtype=float) * t
    n = Q.shape[0]
    out = np.eye(n)
    term = np.eye(n)
    k = 0
    while True:
        k += 1
        term = term @ Q / k
        out = out + term
        if np.max(np.abs(term)) < cutoff and k > 5:
            return out


def poisson_pmf(mu, a_max):
    """Poisson probabilities 0..a_max by the ratio recurrence p_a = p_{a-1} mu / a."""
    p = [math.exp(-mu)]
    for a in range(1, a_max + 1):
        p.append(p[-1] * mu / a)
    return p


def truncation_bound(mus, er, floor):
    """Smallest A >= floor with P(a > A) < er for every mean in ``mus``."""
    A = 0
    while True:
        if all(1.0 - sum(poisson_pmf(mu, A)) < er for mu in mus):
            return max(A, floor)
        A += 1


def binomial_enumeration(x, D, p, literal=True):
    """Transmission pmf by summing over every success pattern count."""
    cap = min(x, D)
    out = [0.0] * (cap + 1)
    n = x if literal else cap
    for j in range(n + 1):
        prob = math.comb(n, j) * p**j * (1 - p) ** (n - j)
        out[min(j, cap)] += prob
    return out


def brute_force_model(D, T, X, er, capacities, p_success, literal=True):
    """Enumerate every (x, s, l, a, k) outcome of one frame.

    Returns (M, drop_rows, arrival_rows, service_rows) where ``drop_rows[i]``
    etc. hold expected drops/arrivals/departures from flat state ``i``.
    """
    D = [np.asarray(m, dtype=float) for m in D]
    S = D[0].shape[0]
    K = len(D) - 1
    phi = taylor_expm(sum(D), T)
    mus = [-D[0][s, s] * T for s in range(S)]
    A = truncation_bound(mus, er, K)
    f = []
    for mu in mus:
        p = poisson_pmf(mu, A)
        p[A] += 1.0 - sum(p)  # tail lumped on A
        f.append(p)
    n = (X + 1) * S
    M = np.zeros((n, n))
    drops = np.zeros(n)
    arrivals = np.zeros(n)
    served = np.zeros(n)
    for x in range(X + 1):
        tk = [0.0] * (x + 1)
        for cap, w in capacities:
            for k, pk in enumerate(binomial_enumeration(x, cap, p_success, literal)):
                tk[k] += w * pk
        for s in range(S):
            i = x * S + s
            for l in range(S):
                for a in range(A + 1):
                    for k in range(x + 1):
                        prob = phi[s, l] * f[l][a] * tk[k]
                        if prob == 0.0:
                            continue
                        y = x + a - k
                        dropped = max(0, y - X)
                        M[i, min(y, X) * S + l] += prob
                        drops[i] += prob * dropped
                        arrivals[i] += prob * a
                        served[i] += prob * k
    return M, drops, arrivals, served, A


def power_stationary(M, tol=1e-15, max_iter=2_000_000):
    pi = np.full(M.shape[0], 1.0 / M.shape[0])
    for _ in range(max_iter):
        nxt = pi @ M
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    raise RuntimeError("power iteration did not converge")


def brute_force_metrics(D, T, X, er, capacities, p_success, literal=True):
    M, drops, arrivals, served, A = brute_force_model(D, T, X, er, capacities, p_success, literal)
    S = np.asarray(D[0]).shape[0]
    pi = power_stationary(M)
    levels = np.repeat(np.arange(X + 1), S)
    xbar = float(pi @ levels)
    lam = float(pi @ arrivals)
    dropped = float(pi @ drops)
    phi = float(pi @ served)
    return {
        "M": M,
        "pi": pi,
        "A": A,
        "avg_queue_length": xbar,
        "avg_dropped_per_frame": dropped,
        "drop_probability": dropped / lam,
        "throughput": phi,
        "avg_delay_frames": xbar / phi,
        "lambda_frame": lam,
    }
