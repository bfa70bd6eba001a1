"""Slot-level Monte Carlo simulator: the independent oracle for the analytics.

Each slot draws a fresh Poisson field of secondary transmitters on a disk of
radius ``sim_radius_factor * R`` (fresh positions and fresh fading every
slot: the analysis averages over field realizations per slot, and the queue
model needs i.i.d. per-slot service success), thins it with the
case-dependent access probability, and decides every link's success.

Success draws: conditionally on the drawn positions, each link's Rayleigh
power fades integrate out in closed form, so a link succeeds with
probability

    exp(-theta sigma^2 d^alpha / P) * prod_j 1 / (1 + theta (P_j/P) (d/d_j)^alpha)

independently across receivers (different receivers see disjoint fade
variables).  The kernel draws each success indicator from that exact
conditional law instead of materializing per-link exponentials; the joint
distribution of all recorded outcomes is identical and the inner loop stays
allocation-free.

Randomness: one SplitMix64 stream per slot, keyed by (seed, slot index), so
the seed plus the slot index fully determines every draw in that slot and
replications parallelize reproducibly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import Finite, Infinite, ProtocolParams, ValidatedConfig

__all__ = [
    "SimSpec",
    "SimStats",
    "EmpiricalProbability",
    "EmpiricalSuccess",
    "sample_ppp",
    "run",
    "empirical_success_probs",
]

_U64 = np.uint64
_GOLD = _U64(0x9E3779B97F4A7C15)
_SEED_TAG = _U64(0x8BADF00DDEADBEEF)
_GAMMA_TAG = _U64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


@njit(cache=True, inline="always")
def _stream(seed, slot):
    """Per-slot SplitMix64 stream: state and odd increment keyed by (seed, slot)."""
    s = _mix((_U64(seed) ^ _SEED_TAG) + _GOLD * _U64(slot))
    g = _mix(s ^ _GAMMA_TAG) | _U64(1)
    return s, g


@njit(cache=True, inline="always")
def _unif(s, g):
    s = s + g
    return float(_mix(s) >> _U64(11)) * 1.1102230246251565e-16, s


@njit(cache=True)
def _poisson(s, g, mu):
    """Exact Poisson sampling: product inversion below 10, PTRS rejection above."""
    if mu <= 0.0:
        return 0, s
    if mu < 10.0:
        limit = math.exp(-mu)
        k = 0
        p = 1.0
        while True:
            u, s = _unif(s, g)
            p *= u
            if p <= limit:
                return k, s
            k += 1
    b = 0.931 + 2.53 * math.sqrt(mu)
    a = -0.059 + 0.02483 * b
    vr = 0.9277 - 3.6224 / (b - 2.0)
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    ln_mu = math.log(mu)
    while True:
        u, s = _unif(s, g)
        u -= 0.5
        v, s = _unif(s, g)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + mu + 0.43)
        if us >= 0.07 and v <= vr:
            return int(k), s
        if k < 0.0 or (us < 0.013 and v > us):
            continue
        if math.log(v * inv_alpha / (a / (us * us) + b)) <= k * ln_mu - mu - math.lgamma(k + 1.0):
            return int(k), s


@njit(cache=True, inline="always")
def _disk_point(s, g, radius):
    while True:
        ux, s = _unif(s, g)
        uy, s = _unif(s, g)
        x = 2.0 * ux - 1.0
        y = 2.0 * uy - 1.0
        if x * x + y * y <= 1.0:
            return x * radius, y * radius, s


@njit(cache=True, inline="always")
def _unit_dir(s, g):
    while True:
        ux, s = _unif(s, g)
        uy, s = _unif(s, g)
        x = 2.0 * ux - 1.0
        y = 2.0 * uy - 1.0
        n2 = x * x + y * y
        if 1e-12 < n2 <= 1.0:
            inv = 1.0 / math.sqrt(n2)
            return x * inv, y * inv, s


@njit(cache=True, inline="always")
def _dist_pow(d2, half_alpha, alpha_is_4):
    # d^alpha from the squared distance; alpha == 4 avoids pow in the hot loop
    if alpha_is_4:
        return d2 * d2
    return d2**half_alpha


@njit(cache=True)
def _active_field(s, g, mean_total, q, radius):
    """Fresh PPP of mean_total expected points, thinned by q; only retained
    positions are materialized (thinning keeps each point independently)."""
    n, s = _poisson(s, g, mean_total)
    xa = np.empty(n)
    ya = np.empty(n)
    na = 0
    for _ in range(n):
        u, s = _unif(s, g)
        if u < q:
            x, y, sn = _disk_point(s, g, radius)
            s = sn
            xa[na] = x
            ya[na] = y
            na += 1
    return xa, ya, na, s


@njit(cache=True)
def _pr_success_prob(xa, ya, na, a_pr, noise_fac, half_alpha, alpha_is_4):
    """P[primary link succeeds | active ST positions]; receiver at the origin."""
    prod = noise_fac
    for j in range(na):
        d2 = xa[j] * xa[j] + ya[j] * ya[j]
        da = _dist_pow(d2, half_alpha, alpha_is_4)
        prod *= da / (da + a_pr)
    return prod


@njit(cache=True)
def _sr_measure(s, g, xa, ya, na, d_s, meas_r2, a_st, a_pt, d_p, pt_active, noise_fac, half_alpha, alpha_is_4):
    """Draw receivers for the active pairs and decide successes inside the
    measurement disk.  Returns (successes, measured, state)."""
    succ = 0
    meas = 0
    for i in range(na):
        ux, uy, s = _unit_dir(s, g)
        sx = xa[i] + d_s * ux
        sy = ya[i] + d_s * uy
        if sx * sx + sy * sy > meas_r2:
            continue
        meas += 1
        prod = noise_fac
        for j in range(na):
            if j == i:
                continue
            dx = sx - xa[j]
            dy = sy - ya[j]
            da = _dist_pow(dx * dx + dy * dy, half_alpha, alpha_is_4)
            prod *= da / (da + a_st)
        if pt_active:
            dx = sx - d_p
            da = _dist_pow(dx * dx + sy * sy, half_alpha, alpha_is_4)
            prod *= da / (da + a_pt)
        u, s = _unif(s, g)
        if u < prod:
            succ += 1
    return succ, meas, s


@njit(cache=True, nogil=True)
def _run_kernel(
    seed,
    slots,
    warmup,
    lam,
    q1,
    q2,
    m_thr,
    mean_total,
    field_r,
    meas_r,
    d_p,
    d_s,
    a_pr,
    a_st,
    a_pt,
    noise_pr,
    noise_sr,
    half_alpha,
    alpha_is_4,
):
    meas_r2 = meas_r * meas_r
    arrival_slot = np.empty(slots + 1, dtype=np.int64)
    head = 0
    tail = 0
    q_len = 0

    occ = np.zeros(3, dtype=np.int64)  # decision-epoch: empty / 1..M / >M
    qsum = 0.0
    quarter_qsum = np.zeros(4, dtype=np.float64)
    quarter_n = np.zeros(4, dtype=np.int64)
    arrivals_pw = 0
    departures_pw = 0
    delay_sum = 0
    delay_n = 0
    c2_slots = 0
    c2_pr_succ = 0
    c3_slots = 0
    c3_pr_succ = 0
    # slot-level SR moments per case: [sum s, sum n, sum s^2, sum n^2, sum s*n, slots]
    sr1 = np.zeros(6, dtype=np.float64)
    sr2 = np.zeros(6, dtype=np.float64)
    q_checkpoint = 0
    q_mid = 0
    q_after_warmup = 0

    span = slots - warmup
    for t in range(slots):
        s, g = _stream(seed, t)
        u, s = _unif(s, g)
        arrived = u < lam
        if arrived:
            arrival_slot[tail] = t
            tail += 1
        y = q_len + (1 if arrived else 0)
        post = t >= warmup
        if post:
            if arrived:
                arrivals_pw += 1
            if y == 0:
                occ[0] += 1
            elif y <= m_thr:
                occ[1] += 1
            else:
                occ[2] += 1
            qsum += y
            qi = (t - warmup) * 4 // span
            quarter_qsum[qi] += y
            quarter_n[qi] += 1

        departed = False
        if y == 0:
            if post:
                xa, ya, na, s = _active_field(s, g, mean_total, q1, field_r)
                sc, me, s = _sr_measure(
                    s, g, xa, ya, na, d_s, meas_r2, a_st, a_pt, d_p, False, noise_sr, half_alpha, alpha_is_4
                )
                sr1[0] += sc
                sr1[1] += me
                sr1[2] += sc * sc
                sr1[3] += me * me
                sr1[4] += sc * me
                sr1[5] += 1.0
        elif y <= m_thr:
            xa, ya, na, s = _active_field(s, g, mean_total, q2, field_r)
            p_pr = _pr_success_prob(xa, ya, na, a_pr, noise_pr, half_alpha, alpha_is_4)
            u, s = _unif(s, g)
            departed = u < p_pr
            if post:
                c2_slots += 1
                if departed:
                    c2_pr_succ += 1
                sc, me, s = _sr_measure(
                    s, g, xa, ya, na, d_s, meas_r2, a_st, a_pt, d_p, True, noise_sr, half_alpha, alpha_is_4
                )
                sr2[0] += sc
                sr2[1] += me
                sr2[2] += sc * sc
                sr2[3] += me * me
                sr2[4] += sc * me
                sr2[5] += 1.0
        else:
            u, s = _unif(s, g)
            departed = u < noise_pr
            if post:
                c3_slots += 1
                if departed:
                    c3_pr_succ += 1

        if departed:
            born = arrival_slot[head]
            head += 1
            q_len = y - 1
            if post:
                departures_pw += 1
                delay_sum += t - born + 1
                delay_n += 1
        else:
            q_len = y

        if t == warmup - 1:
            q_after_warmup = q_len
        if t == warmup + span // 20:
            q_checkpoint = q_len
        if t == warmup + span // 2:
            q_mid = q_len

    return (
        occ,
        qsum,
        quarter_qsum,
        quarter_n,
        arrivals_pw,
        departures_pw,
        delay_sum,
        delay_n,
        c2_slots,
        c2_pr_succ,
        c3_slots,
        c3_pr_succ,
        sr1,
        sr2,
        q_len,
        q_after_warmup,
        q_checkpoint,
        q_mid,
    )


@njit(cache=True, nogil=True)
def _channel_kernel(
    seed, slots, q, pt_active, mean_total, field_r, meas_r, d_p, d_s, a_pr, a_st, a_pt, noise_pr, noise_sr,
    half_alpha, alpha_is_4,
):
    """Queue-free field sampling of one protocol case; returns PR and SR counts."""
    meas_r2 = meas_r * meas_r
    pr_succ = 0
    sr = np.zeros(6, dtype=np.float64)
    for t in range(slots):
        s, g = _stream(seed, t)
        xa, ya, na, s = _active_field(s, g, mean_total, q, field_r)
        if pt_active:
            p_pr = _pr_success_prob(xa, ya, na, a_pr, noise_pr, half_alpha, alpha_is_4)
            u, s = _unif(s, g)
            if u < p_pr:
                pr_succ += 1
        sc, me, s = _sr_measure(
            s, g, xa, ya, na, d_s, meas_r2, a_st, a_pt, d_p, pt_active, noise_sr, half_alpha, alpha_is_4
        )
        sr[0] += sc
        sr[1] += me
        sr[2] += sc * sc
        sr[3] += me * me
        sr[4] += sc * me
        sr[5] += 1.0
    return pr_succ, sr


@njit(cache=True)
def _bernoulli_kernel(seed, slots, p):
    s, g = _stream(seed, 0)
    hits = 0
    for _ in range(slots):
        u, s = _unif(s, g)
        if u < p:
            hits += 1
    return hits


@njit(cache=True)
def _ppp_kernel(seed, slot, mean_total, radius, pair_distance):
    s, g = _stream(seed, slot)
    n, s = _poisson(s, g, mean_total)
    pts = np.empty((n, 2))
    rx = np.empty((n, 2))
    for i in range(n):
        x, y, s = _disk_point(s, g, radius)
        pts[i, 0] = x
        pts[i, 1] = y
        ux, uy, s = _unit_dir(s, g)
        rx[i, 0] = x + pair_distance * ux
        rx[i, 1] = y + pair_distance * uy
    return pts, rx


def sample_ppp(intensity: float, radius: float, seed: int, slot: int = 0, pair_distance: float | None = None):
    """One realization of the secondary field on a disk.

    Returns an (n, 2) array of transmitter positions and, when
    ``pair_distance`` is given, also the paired receiver positions at that
    fixed distance in an independent uniform direction.  The count is
    Poisson(intensity * pi * radius^2); (seed, slot) select the stream.
    """
    if intensity < 0:
        raise ValueError("intensity must be >= 0")
    mean_total = intensity * math.pi * radius * radius
    pts, rx = _ppp_kernel(np.uint64(seed), np.uint64(slot), mean_total, radius, pair_distance or 0.0)
    if pair_distance is None:
        return pts
    return pts, rx


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimSpec:
    """Simulation controls.

    The interference field is simulated on a disk of radius
    ``sim_radius_factor * R`` (default 3: the missing far field at alpha = 4
    is orders of magnitude below Monte Carlo noise), while secondary
    throughput is counted for receivers inside ``measure_radius``
    (default R).
    """

    slots: int
    seed: int
    sim_radius_factor: float = 3.0
    measure_radius: float | None = None
    warmup_slots: int = 2000

    def __post_init__(self):
        if self.slots <= self.warmup_slots:
            raise ValueError(f"slots ({self.slots}) must exceed warmup_slots ({self.warmup_slots})")
        if self.sim_radius_factor < 1.0:
            raise ValueError("sim_radius_factor must be >= 1")
        if self.warmup_slots < 0:
            raise ValueError("warmup_slots must be >= 0")


@dataclass(frozen=True)
class EmpiricalProbability:
    """Point estimate with its standard error and sample count."""

    value: float
    se: float
    n: int


@dataclass(frozen=True)
class EmpiricalSuccess:
    """Empirical counterparts of the four case success probabilities."""

    p_2_2: EmpiricalProbability
    p_1_12: EmpiricalProbability
    p_2_12: EmpiricalProbability
    p_1_1: EmpiricalProbability


@dataclass(frozen=True)
class SimStats:
    """Everything measured by one simulator run (post-warmup slots only).

    ``emp_sojourn`` is the mean per-packet time in system, arrival slot to
    successful-departure slot inclusive.  ``emp_delay`` is the empirical
    counterpart of the analytic average-delay metric: that sojourn plus the
    mean transmission time ``1/mu_bar_emp`` (the analytic metric adds the
    reciprocal conditional service rate on top of the Little term, so its
    unbiased empirical twin must do the same).  Little's law ties the pieces
    together: emp_qbar = lam * (emp_delay - 1/mu_bar_emp) up to edge effects.
    """

    emp_p: EmpiricalSuccess
    emp_occupancy: tuple[float, float, float]
    emp_qbar: float
    emp_delay: float
    emp_sojourn: float
    emp_ts: float
    departures: int
    arrivals: int
    final_q: int
    q_after_warmup: int
    q_checkpoint: int
    q_mid: int
    mu_bar_emp: float
    quarter_qbar: tuple[float, float, float, float]
    queue_growing: bool
    slots: int
    warmup_slots: int


def _ratio_estimate(moments: np.ndarray) -> EmpiricalProbability:
    """Per-pair success probability from slot-level totals.

    The estimator is total successes / total measured pairs; its standard
    error treats each slot as one cluster (pairs within a slot share the
    interference geometry, so per-pair binomial errors would be optimistic).
    """
    s_tot, n_tot, s2, n2, sn, n_slots = moments
    if n_tot <= 0:
        return EmpiricalProbability(math.nan, math.nan, 0)
    p = s_tot / n_tot
    resid2 = s2 - 2.0 * p * sn + p * p * n2
    se = math.sqrt(max(resid2, 0.0)) / n_tot
    return EmpiricalProbability(p, se, int(n_tot))


def _binom_estimate(successes: int, n: int) -> EmpiricalProbability:
    if n <= 0:
        return EmpiricalProbability(math.nan, math.nan, 0)
    p = successes / n
    return EmpiricalProbability(p, math.sqrt(max(p * (1.0 - p), 0.0) / n), n)


def _channel_constants(cfg: ValidatedConfig, p2_mw: float):
    c, g = cfg.channel, cfg.geometry
    a = c.alpha
    return dict(
        a_pr=c.theta * (p2_mw / c.p1_mw) * g.d_p**a,
        a_st=c.theta * g.d_s**a,
        a_pt=c.theta * (c.p1_mw / p2_mw) * g.d_s**a,
        noise_pr=math.exp(-c.theta * c.noise_mw * g.d_p**a / c.p1_mw),
        noise_sr=math.exp(-c.theta * c.noise_mw * g.d_s**a / p2_mw),
        half_alpha=a / 2.0,
        alpha_is_4=a == 4.0,
    )


def run(cfg: ValidatedConfig, protocol: ProtocolParams | None = None, spec: SimSpec | None = None) -> SimStats:
    """Simulate the full protocol and return the measured statistics.

    Per slot: Bernoulli(lam) arrival joins the queue, the queue is observed
    to pick Case 1/2/3 (secondary thinning q1 / q2 / silence), a fresh field
    realization decides the primary success (dequeue) and the successes of
    every active secondary receiver inside the measurement disk. Unstable
    parameterizations run fine and simply report a growing queue.
    """
    p = cfg.protocol if protocol is None else protocol
    if spec is None:
        spec = SimSpec(slots=100_000, seed=0)
    g = cfg.geometry
    meas_r = g.radius if spec.measure_radius is None else spec.measure_radius
    if meas_r > g.radius:
        raise ValueError("measure_radius must not exceed the network radius")
    field_r = spec.sim_radius_factor * g.radius
    mean_total = g.lambda_s * math.pi * field_r * field_r
    m_thr = p.m.m if isinstance(p.m, Finite) else np.iinfo(np.int64).max // 2
    k = _channel_constants(cfg, p.p2_mw)

    (
        occ,
        qsum,
        quarter_qsum,
        quarter_n,
        arrivals_pw,
        departures_pw,
        delay_sum,
        delay_n,
        c2_slots,
        c2_pr_succ,
        c3_slots,
        c3_pr_succ,
        sr1,
        sr2,
        final_q,
        q_after_warmup,
        q_checkpoint,
        q_mid,
    ) = _run_kernel(
        np.uint64(spec.seed),
        spec.slots,
        spec.warmup_slots,
        p.lam,
        p.q1,
        p.q2,
        m_thr,
        mean_total,
        field_r,
        meas_r,
        g.d_p,
        g.d_s,
        k["a_pr"],
        k["a_st"],
        k["a_pt"],
        k["noise_pr"],
        k["noise_sr"],
        k["half_alpha"],
        k["alpha_is_4"],
    )

    n_post = spec.slots - spec.warmup_slots
    occupancy = tuple(occ / n_post)
    emp_qbar = qsum / n_post
    sojourn = delay_sum / delay_n if delay_n else math.nan
    pt_slots = c2_slots + c3_slots
    mu_bar_emp = departures_pw / pt_slots if pt_slots else math.nan
    emp_delay = sojourn + 1.0 / mu_bar_emp if pt_slots and delay_n else math.nan
    emp_ts = (sr1[0] + sr2[0]) / (n_post * math.pi * meas_r**2)
    quarters = tuple(
        quarter_qsum[i] / quarter_n[i] if quarter_n[i] else math.nan for i in range(4)
    )
    growing = final_q > 10 * max(q_checkpoint, 1) and final_q > 100

    emp = EmpiricalSuccess(
        p_2_2=_ratio_estimate(sr1),
        p_1_12=_binom_estimate(c2_pr_succ, c2_slots),
        p_2_12=_ratio_estimate(sr2),
        p_1_1=_binom_estimate(c3_pr_succ, c3_slots),
    )
    return SimStats(
        emp_p=emp,
        emp_occupancy=occupancy,
        emp_qbar=emp_qbar,
        emp_delay=emp_delay,
        emp_sojourn=sojourn,
        emp_ts=emp_ts,
        departures=int(departures_pw),
        arrivals=int(arrivals_pw),
        final_q=int(final_q),
        q_after_warmup=int(q_after_warmup),
        q_checkpoint=int(q_checkpoint),
        q_mid=int(q_mid),
        mu_bar_emp=mu_bar_emp,
        quarter_qbar=quarters,
        queue_growing=bool(growing),
        slots=spec.slots,
        warmup_slots=spec.warmup_slots,
    )


def empirical_success_probs(
    cfg: ValidatedConfig, q1: float, q2: float, p2_mw: float, slots: int = 100_000, seed: int = 0
) -> EmpiricalSuccess:
    """Queue-free empirical estimates of all four success probabilities.

    Draws ``slots`` independent Case-1 realizations (primary silent, thinning
    q1) and ``slots`` Case-2 realizations (primary active, thinning q2); the
    noise-only Case 3 is measured from plain Bernoulli draws.
    """
    g = cfg.geometry
    field_r = 3.0 * g.radius
    mean_total = g.lambda_s * math.pi * field_r * field_r
    k = _channel_constants(cfg, p2_mw)
    args = (mean_total, field_r, g.radius, g.d_p, g.d_s, k["a_pr"], k["a_st"], k["a_pt"], k["noise_pr"],
            k["noise_sr"], k["half_alpha"], k["alpha_is_4"])
    _, sr1 = _channel_kernel(np.uint64(seed), slots, q1, False, *args)
    pr2, sr2 = _channel_kernel(np.uint64(seed) + _U64(0x5DEECE66D), slots, q2, True, *args)
    # Case 3 needs no geometry: success is the noise-only Bernoulli
    c3 = _bernoulli_kernel(np.uint64(seed) + _U64(0xB5297A4D), slots, k["noise_pr"])
    return EmpiricalSuccess(
        p_2_2=_ratio_estimate(sr1),
        p_1_12=_binom_estimate(pr2, slots),
        p_2_12=_ratio_estimate(sr2),
        p_1_1=_binom_estimate(c3, slots),
    )
