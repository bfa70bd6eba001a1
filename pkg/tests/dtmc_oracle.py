"""Independent queue oracle: power iteration on the truncated transition matrix.

The transition probabilities are written straight from the slot dynamics
(arrival Bernoulli(lam), service Bernoulli(mu1 or mu2 by queue state), moves
of at most one packet per slot), not from any closed form, so agreement with
the analytical module is a genuine two-route check.
"""

from __future__ import annotations

import numpy as np


def truncation_size(lam: float, mu1: float, mu2: float, m: int, tail_tol: float = 1e-13) -> int:
    # states above m decay geometrically with ratio lam(1-mu2)/((1-lam)mu2) < 1
    xi2 = lam * (1.0 - mu2) / ((1.0 - lam) * mu2)
    if xi2 <= 0.0:
        return m + 12
    n_tail = int(np.ceil(np.log(tail_tol * (1.0 - xi2)) / np.log(xi2)))
    return m + max(n_tail, 12) + 12


def oracle_stationary(
    lam: float, mu1: float, mu2: float, m: int, n_states: int | None = None, tol: float = 1e-14
) -> np.ndarray:
    """Stationary vector of the truncated chain by power iteration."""
    n = (n_states if n_states is not None else truncation_size(lam, mu1, mu2, m)) + 1
    idx = np.arange(n)
    mu = np.where(idx <= m, mu1, mu2).astype(float)
    mu[0] = 0.0
    up = np.empty(n)
    up[0] = lam  # an arrival always lifts an empty queue (nothing to serve yet)
    up[1:] = lam * (1.0 - mu[1:])  # arrival and failed service
    down = (1.0 - lam) * mu  # no arrival and successful service
    up[-1] = 0.0  # reflect at the truncation boundary
    stay = 1.0 - up - down

    pi = np.full(n, 1.0 / n)
    for _ in range(5_000_000):
        new = pi * stay
        new[1:] += pi[:-1] * up[:-1]
        new[:-1] += pi[1:] * down[1:]
        delta = np.abs(new - pi).sum()
        pi = new
        if delta < tol:
            break
    return pi / pi.sum()


def oracle_summary(lam: float, mu1: float, mu2: float, m: int, **kw):
    """(pi0, P[1<=Q<=m], P[Q>m], q_bar, delay) from the stationary vector.

    Delay follows the metric definition: mean queue per arrival (Little)
    plus the reciprocal of the conditional service rate.
    """
    pi = oracle_stationary(lam, mu1, mu2, m, **kw)
    idx = np.arange(pi.size)
    pi0 = pi[0]
    pmid = pi[(idx >= 1) & (idx <= m)].sum()
    pab = pi[idx > m].sum()
    qbar = float((idx * pi).sum())
    mu_bar = (pmid * mu1 + pab * mu2) / (pmid + pab)
    delay = qbar / lam + 1.0 / mu_bar if lam > 0 else np.nan
    return pi0, pmid, pab, qbar, delay
