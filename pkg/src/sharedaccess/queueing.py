"""Exact analysis of the primary queue's discrete-time Markov chain.

The chain tracks the queue observed at the protocol decision epoch with a
Bernoulli(lam) arrival per slot and a state-dependent service probability:
``mu1`` while ``1 <= Q <= M`` (secondaries active) and ``mu2`` while
``Q > M`` (secondaries silenced).  Cut balance across level i gives the
two-regime geometric stationary distribution; the closed forms below follow
from normalization and the geometric-series sums.

Numerics: the rational closed forms suffer catastrophic cancellation around
``xi = lam(1-mu1)/((1-lam)mu1) = 1`` (a removable singularity), so the
implementation switches to a direct summation path near that point, and for
``xi > 1`` (possible while stable when ``mu1 < lam < mu2``) rescales every
ratio by ``xi^-M`` so no intermediate overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateXi, Unstable, ZeroArrival
from .model import CongestionLimit, Finite, Infinite

__all__ = [
    "ServiceRates",
    "StationaryDistribution",
    "QueueAnalysis",
    "xi_ratio",
    "is_stable",
    "stationary",
    "occupancy",
    "analyze",
]

# |xi - 1| below this: the rational forms are replaced by direct summation.
_XI_SUMMATION = 1e-6
# |xi - 1| below this: occupancy()'s closed-form contract refuses outright.
_XI_DEGENERATE = 1e-9
# |lam - mu1| below this (relative): stationary() uses the l'Hopital pi(0).
_LHOPITAL = 1e-9


@dataclass(frozen=True)
class ServiceRates:
    """State-dependent service probabilities (mu1 while secondaries are active)."""

    mu1: float
    mu2: float

    def __post_init__(self):
        if not (0.0 < self.mu1 <= self.mu2 <= 1.0):
            raise ValueError(f"require 0 < mu1 <= mu2 <= 1, got mu1={self.mu1}, mu2={self.mu2}")


def xi_ratio(lam: float, mu1: float) -> float:
    """Geometric ratio of the below-threshold stationary tail."""
    return lam * (1.0 - mu1) / ((1.0 - lam) * mu1)


def is_stable(lam: float, rates: ServiceRates, m: CongestionLimit) -> bool:
    """Stability: lam < mu2 with a finite threshold, lam < mu1 without one."""
    if isinstance(m, Finite):
        return lam < rates.mu2
    return lam < rates.mu1


def _require_stable(lam: float, rates: ServiceRates, m: CongestionLimit) -> None:
    if not is_stable(lam, rates, m):
        bound = rates.mu2 if isinstance(m, Finite) else rates.mu1
        raise Unstable(f"queue unstable: lam={lam} >= {bound} for m={m}")


def _by_summation(lam: float, mu1: float, mu2: float, M: int):
    """Occupancies/moments by direct normalization of the stationary ratios.

    Exact for every xi including xi == 1; used near the removable
    singularity where the rational forms cancel catastrophically.
    """
    rho1 = lam / ((1.0 - lam) * mu1)
    xi = rho1 * (1.0 - mu1)
    xi2 = lam * (1.0 - mu2) / ((1.0 - lam) * mu2)
    r = lam * (1.0 - mu1) / ((1.0 - lam) * mu2)
    i = np.arange(M, dtype=np.float64)
    pows = xi**i  # xi^(i-1) for i = 1..M
    s_mid = rho1 * float(pows.sum())
    s_moment = rho1 * float(((i + 1.0) * pows).sum())
    base = rho1 * xi ** (M - 1) * r  # pi(M+1)/pi(0)
    t0 = base / (1.0 - xi2)
    t1 = base / (1.0 - xi2) ** 2
    inv_pi0 = 1.0 + s_mid + t0
    pi0 = 1.0 / inv_pi0
    pmid = s_mid * pi0
    pab = t0 * pi0
    qbar = (s_moment + M * t0 + t1) * pi0
    inv_mubar = (pmid + pab) / (pmid * mu1 + pab * mu2)
    return pi0, pmid, pab, qbar, inv_mubar


def _closed_arrays(lam: float, mu1: np.ndarray, mu2: float, M: int):
    """Vectorized closed forms over an array of mu1 values (finite M).

    Returns (pi0, prob_mid, prob_above, q_bar, 1/mu_bar) arrays.  Single
    source of truth for the scalar API, the grid optimizer and the sweeps.
    """
    mu1 = np.asarray(mu1, dtype=np.float64)
    shape = mu1.shape
    mu1 = np.atleast_1d(mu1)
    pi0 = np.empty_like(mu1)
    pmid = np.empty_like(mu1)
    pab = np.empty_like(mu1)
    qbar = np.empty_like(mu1)
    inv_mubar = np.empty_like(mu1)

    if lam == 0.0:
        pi0[:] = 1.0
        pmid[:] = 0.0
        pab[:] = 0.0
        qbar[:] = 0.0
        inv_mubar[:] = 1.0 / mu2  # mu_bar defaults to mu2 when the queue never fills
        return (x.reshape(shape) for x in (pi0, pmid, pab, qbar, inv_mubar))

    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        xi = lam * (1.0 - mu1) / ((1.0 - lam) * mu1)
        log_xi = np.log(xi, out=np.full_like(xi, -np.inf), where=xi > 0)
        near = np.abs(xi - 1.0) < _XI_SUMMATION
        lo = (xi < 1.0) & ~near
        hi = (xi > 1.0) & ~near

        if lo.any():
            m1 = mu1[lo]
            x = xi[lo]
            xiM = np.exp(M * log_xi[lo])  # underflow to 0 is benign here
            D = m1 * mu2 - lam * m1 - lam * xiM * (mu2 - m1)
            pi0[lo] = (m1 - lam) * (mu2 - lam) / D
            pmid[lo] = lam * (1.0 - xiM) * (mu2 - lam) / D
            pab[lo] = lam * xiM * (m1 - lam) / D
            n1 = lam * (1.0 - lam) * m1 * (mu2 - lam) / (m1 - lam) * (M * xiM * x - (M + 1.0) * xiM + 1.0)
            n2 = xiM * lam * (m1 - lam) * (M + (1.0 - lam) * mu2 / (mu2 - lam))
            qbar[lo] = (n1 + n2) / D
            inv_mubar[lo] = (mu2 - lam - xiM * (mu2 - m1)) / D

        if hi.any():
            # Stable only when mu1 < lam < mu2; every ratio is rescaled by
            # u = xi^-M so xi^M never overflows for large M.
            m1 = mu1[hi]
            x = xi[hi]
            u = np.exp(-M * log_xi[hi])
            Ds = u * (m1 * mu2 - lam * m1) - lam * (mu2 - m1)
            pi0[hi] = (m1 - lam) * (mu2 - lam) * u / Ds
            pmid[hi] = lam * (u - 1.0) * (mu2 - lam) / Ds
            pab[hi] = lam * (m1 - lam) / Ds
            n1 = lam * (1.0 - lam) * m1 * (mu2 - lam) / (m1 - lam) * (M * x - (M + 1.0) + u)
            n2 = lam * (m1 - lam) * (M + (1.0 - lam) * mu2 / (mu2 - lam))
            qbar[hi] = (n1 + n2) / Ds
            inv_mubar[hi] = (u * (mu2 - lam) - (mu2 - m1)) / Ds

    for idx in np.flatnonzero(near):
        pi0[idx], pmid[idx], pab[idx], qbar[idx], inv_mubar[idx] = _by_summation(lam, float(mu1[idx]), mu2, M)

    return (x.reshape(shape) for x in (pi0, pmid, pab, qbar, inv_mubar))


def _finite_scalar(lam: float, rates: ServiceRates, M: int):
    pi0, pmid, pab, qbar, inv_mubar = _closed_arrays(lam, np.float64(rates.mu1), rates.mu2, M)
    return float(pi0), float(pmid), float(pab), float(qbar), float(inv_mubar)


@dataclass(frozen=True)
class StationaryDistribution:
    """Stationary law of the queue with an evaluator for individual states."""

    lam: float
    rates: ServiceRates
    m: CongestionLimit
    pi0: float

    def pmf(self, i):
        """pi(i) for scalar or array i (two-regime geometric forms)."""
        i = np.asarray(i)
        lam, mu1, mu2 = self.lam, self.rates.mu1, self.rates.mu2
        if lam == 0.0:
            return np.where(i == 0, 1.0, 0.0)
        rho1 = lam / ((1.0 - lam) * mu1)
        xi = rho1 * (1.0 - mu1)
        M = self.m.m if isinstance(self.m, Finite) else None
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            below = rho1 * xi ** np.maximum(i - 1, 0) * self.pi0
            if M is None:
                out = np.where(i == 0, self.pi0, below)
                return out if out.shape else float(out)
            xi2 = lam * (1.0 - mu2) / ((1.0 - lam) * mu2)
            r = lam * (1.0 - mu1) / ((1.0 - lam) * mu2)
            above = rho1 * xi ** (M - 1) * r * xi2 ** np.maximum(i - M - 1, 0) * self.pi0
        out = np.where(i == 0, self.pi0, np.where(i <= M, below, above))
        return out if out.shape else float(out)

    def __call__(self, i):
        return self.pmf(i)


def stationary(lam: float, rates: ServiceRates, m: CongestionLimit) -> StationaryDistribution:
    """Stationary distribution; requires stability.

    pi(0) comes from the rational form away from lam == mu1 and from the
    l'Hopital limit on that removable singularity.
    """
    _require_stable(lam, rates, m)
    mu1, mu2 = rates.mu1, rates.mu2
    if lam == 0.0:
        return StationaryDistribution(lam, rates, m, 1.0)
    if isinstance(m, Infinite):
        return StationaryDistribution(lam, rates, m, 1.0 - lam / mu1)
    M = m.m
    if abs(lam - mu1) < _LHOPITAL * max(lam, mu1):
        pi0 = (mu2 - mu1) / (mu1 + (mu2 - mu1) * (M + 1.0 - mu1) / (1.0 - mu1))
    else:
        pi0 = _finite_scalar(lam, rates, M)[0]
    return StationaryDistribution(lam, rates, m, pi0)


def occupancy(lam: float, rates: ServiceRates, m: Finite) -> tuple[float, float]:
    """(P[1 <= Q <= M], P[Q > M]) from the closed forms.

    Raises DegenerateXi within 1e-9 of xi == 1: that regime belongs to the
    summation over :func:`stationary` (analyze() does this automatically).
    """
    if not isinstance(m, Finite):
        raise TypeError("occupancy closed form is defined for finite thresholds")
    _require_stable(lam, rates, m)
    if lam == 0.0:
        return 0.0, 0.0
    if abs(xi_ratio(lam, rates.mu1) - 1.0) < _XI_DEGENERATE:
        raise DegenerateXi("xi within 1e-9 of 1; use the lam == mu1 summation path")
    _, pmid, pab, _, _ = _finite_scalar(lam, rates, m.m)
    return pmid, pab


@dataclass(frozen=True)
class QueueAnalysis:
    """Stationary occupancies and the derived queue/delay metrics.

    ``delay`` is None when the arrival rate is zero and the caller asked to
    skip it; ``mu_bar_defaulted`` flags the lam == 0 convention where the
    conditional service rate is conventionally mu2 (the queue never fills).
    """

    pi0: float
    prob_mid: float
    prob_above: float
    q_bar: float
    mu_bar: float
    delay: float | None
    stable: bool
    xi: float
    mu_bar_defaulted: bool = False


def analyze(
    lam: float, rates: ServiceRates, m: CongestionLimit, require_delay: bool = True
) -> QueueAnalysis:
    """Full queue analysis: occupancies, mean queue, mean service rate, delay.

    The delay is mean-queue-per-arrival (Little) plus the mean transmission
    time 1/mu_bar.  It needs lam > 0; with ``require_delay`` the lam == 0
    case raises ZeroArrival, otherwise the field is None.
    """
    _require_stable(lam, rates, m)
    mu1, mu2 = rates.mu1, rates.mu2
    if lam == 0.0:
        if require_delay:
            raise ZeroArrival("average delay undefined at lam = 0")
        return QueueAnalysis(1.0, 0.0, 0.0, 0.0, mu2, None, True, 0.0, mu_bar_defaulted=True)

    xi = xi_ratio(lam, mu1)
    if isinstance(m, Infinite):
        pi0 = 1.0 - lam / mu1
        pmid = lam / mu1  # P[Q >= 1]
        pab = 0.0
        qbar = lam * (1.0 - lam) / (mu1 - lam)
        inv_mubar = 1.0 / mu1
    else:
        pi0, pmid, pab, qbar, inv_mubar = _finite_scalar(lam, rates, m.m)
    delay = qbar / lam + inv_mubar
    return QueueAnalysis(pi0, pmid, pab, qbar, 1.0 / inv_mubar, delay, True, xi)
