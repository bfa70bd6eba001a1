"""Secondary-network throughput and primary delay at an operating point.

Composes the physical-layer success probabilities with the queue analysis:
the secondary field is active with probability q1 while the primary queue is
empty and q2 while it is at or below the congestion threshold, so the
per-area throughput is

    T_s = lambda_s * (P[Q=0] q1 p_2_2  +  P[1<=Q<=M] q2 p_2_12),

with the queue probabilities evaluated at mu1 = p_1_12(q2, P2) and
mu2 = p_1_1.  mu1 is always recomputed from (q2, P2) so an inconsistent
(mu1, q2) pair cannot be fed in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import phy, queueing
from .errors import Unstable
from .model import Finite, Infinite, ProtocolParams, ValidatedConfig

__all__ = ["ThroughputReport", "secondary_throughput"]


@dataclass(frozen=True)
class ThroughputReport:
    """Per-area secondary throughput with its two-case breakdown.

    ``breakdown`` is (queue-empty contribution, queue-busy contribution);
    their sum is ``t_s``.  ``feasible`` means stable and, when a delay
    constraint is configured, average delay strictly below it.
    """

    t_s: float
    breakdown: tuple[float, float]
    delay: float
    feasible: bool


def _terms(cfg: ValidatedConfig, lam: float, q1: float, q2, p2_mw: float, m):
    """(t_s, delay, case1, case2) without any stability gate; q2 may be an array.

    Used by the optimizer, where boundary points (e.g. exactly binding
    stability) must still evaluate: every expression below is continuous
    there.  Delay uses the zero-arrival limit 2/mu1 when lam == 0.
    """
    g = cfg.geometry
    mu2 = phy.p_1_1(cfg)
    mu1 = np.asarray(phy.p_1_12(q2, p2_mw, cfg), dtype=np.float64)
    if isinstance(m, Finite):
        pi0, pmid, _, qbar, inv_mubar = queueing._closed_arrays(lam, mu1, mu2, m.m)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            pi0 = 1.0 - lam / mu1
            pmid = lam / mu1
            qbar = lam * (1.0 - lam) / (mu1 - lam)
            inv_mubar = 1.0 / mu1
    if lam == 0.0:
        delay = 2.0 / mu1
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            delay = qbar / lam + inv_mubar
    case1 = g.lambda_s * pi0 * q1 * phy.p_2_2(q1, cfg, p2_mw)
    case2 = g.lambda_s * pmid * q2 * phy.p_2_12(q2, p2_mw, cfg)
    return case1 + case2, delay, case1, case2


def secondary_throughput(cfg: ValidatedConfig, protocol: ProtocolParams | None = None) -> ThroughputReport:
    """Throughput report at the given protocol point (default: cfg.protocol).

    Raises Unstable when the arrival rate reaches the stability bound of the
    selected congestion regime (mu2 with a finite threshold, mu1 without).
    """
    p = cfg.protocol if protocol is None else protocol
    mu1 = float(phy.p_1_12(p.q2, p.p2_mw, cfg))
    mu2 = phy.p_1_1(cfg)
    rates = queueing.ServiceRates(mu1=mu1, mu2=mu2)
    if not queueing.is_stable(p.lam, rates, p.m):
        bound = mu2 if isinstance(p.m, Finite) else mu1
        raise Unstable(f"lam={p.lam} >= {bound}: no stationary regime for m={p.m}")
    ts, delay, case1, case2 = _terms(cfg, p.lam, p.q1, p.q2, p.p2_mw, p.m)
    delay = float(delay)
    feasible = cfg.delay is None or delay < cfg.delay.d_max
    return ThroughputReport(t_s=float(ts), breakdown=(float(case1), float(case2)), delay=delay, feasible=feasible)
