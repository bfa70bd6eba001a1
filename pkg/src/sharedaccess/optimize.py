"""Access-probability and power optimization for the secondary network.

Two routes:

* Without congestion control the throughput, as a function of q2 at fixed
  power, has a single stationary point expressible through the Lambert W
  function; intersecting it with the stability and delay bounds gives the
  constrained optimum in closed form.
* With a finite congestion threshold no closed form exists, so
  ``grid_optimize`` exhaustively evaluates the throughput surface over a
  (q2, P2) grid filtered by the delay constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import metrics, phy
from .errors import DomainError, InvalidArrival, NoFeasiblePoint, PowerRatioViolation, Unstable
from .model import INFINITE, DelayConstraint, Finite, ValidatedConfig

__all__ = [
    "KappaConstants",
    "kappa_constants",
    "lambert_w0",
    "optimal_q1",
    "global_optimal_q2",
    "FeasibleBound",
    "feasible_q2_bound",
    "OptimizationResult",
    "constrained_optimal_q2",
    "GridSpec",
    "grid_optimize",
]

_INV_E = -math.exp(-1.0)


@dataclass(frozen=True)
class KappaConstants:
    """Interference geometry constants entering the closed-form optimum.

    kappa1: secondary-field exponent area (m^2), pi d_s^2 theta^(2/alpha)/sinc(2/alpha)
    kappa2: primary-exposure exponent area (m^2), same form with d_p and the
        power ratio P2/P1 folded in
    c12_star: empty-queue optimal per-node throughput weighted by the
        primary-interference penalty at the receiver.  The secondary noise
        factor multiplies both branches of the throughput and cancels from
        the stationarity condition, so it is deliberately not included here
        (keeping it would bias the optimum at low power).
    """

    kappa1: float
    kappa2: float
    c12_star: float


def optimal_q1(cfg: ValidatedConfig) -> float:
    """Access probability maximizing q1 * p_2_2(q1): the interior optimum capped at 1.

    Interior form: sinc(2/alpha) / (pi lambda_s theta^(2/alpha) d_s^2).
    """
    g, c = cfg.geometry, cfg.channel
    a = c.alpha
    interior = phy.sinc_norm(2.0 / a) / (math.pi * g.lambda_s * c.theta ** (2.0 / a) * g.d_s**2)
    return min(interior, 1.0)


def kappa_constants(cfg: ValidatedConfig, p2_mw: float) -> KappaConstants:
    g, c = cfg.geometry, cfg.channel
    a = c.alpha
    s = phy.sinc_norm(2.0 / a)
    kappa1 = math.pi * g.d_s**2 * c.theta ** (2.0 / a) / s
    kappa2 = math.pi * g.d_p**2 * (c.theta * p2_mw / c.p1_mw) ** (2.0 / a) / s
    e_d = phy.expected_pt_to_sr_distance(cfg)
    penalty = 1.0 + (g.d_s**2 / e_d**2) * (c.theta * c.p1_mw / p2_mw) ** (2.0 / a)
    q1s = optimal_q1(cfg)
    c12 = q1s * math.exp(-q1s * g.lambda_s * kappa1) * penalty
    return KappaConstants(kappa1=kappa1, kappa2=kappa2, c12_star=c12)


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function (w e^w = x, w >= -1).

    Halley iteration seeded by a branch-point series near -1/e and a
    log-based guess elsewhere; residual |w e^w - x| <= 1e-12 max(1, |x|).
    """
    if x < _INV_E:
        if x > _INV_E * (1.0 + 1e-12):  # roundoff guard at the branch point
            x = _INV_E
        else:
            raise DomainError(f"lambert_w0 requires x >= -1/e, got {x}")
    if x == 0.0:
        return 0.0
    if x < _INV_E * (1.0 - 1e-12):  # exactly the branch point after the guard
        return -1.0
    # seed
    if x < -0.32:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0
    elif x < math.e:
        w = math.log1p(x) if x > 0 else x * math.exp(-x)  # small-|x| behaviors
    else:
        lx = math.log(x)
        w = lx - math.log(lx)
    tol = 1e-13 * max(1.0, abs(x))
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= tol:
            return w
        wp1 = w + 1.0
        if wp1 == 0.0:
            w += 1e-9
            continue
        w -= f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
    if abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, abs(x)):
        return w
    raise ArithmeticError(f"lambert_w0 failed to converge for x={x}")


def _lambert_w0_log(y: float) -> float:
    """W0(e^y) for large y, solving w + ln w = y without forming e^y."""
    w = max(y - math.log(max(y, 2.0)), 1.0)
    for _ in range(60):
        f = w + math.log(w) - y
        w -= f * w / (w + 1.0)
        if abs(f) <= 1e-14 * max(1.0, abs(y)):
            return w
    return w


def _global_q2_unclamped(cfg: ValidatedConfig, p2_mw: float) -> float:
    g, c = cfg.geometry, cfg.channel
    if p2_mw / c.p1_mw >= (g.d_s / g.d_p) ** c.alpha:
        raise PowerRatioViolation(
            f"closed form requires P2/P1 < (d_s/d_p)^alpha = {(g.d_s / g.d_p) ** c.alpha:.4g}, "
            f"got {p2_mw / c.p1_mw:.4g}"
        )
    k = kappa_constants(cfg, p2_mw)
    ls = g.lambda_s
    gap = k.kappa1 - k.kappa2
    log_arg = math.log(ls * k.kappa1 * k.kappa2 * k.c12_star / gap)
    exponent = k.kappa1 / gap
    y = log_arg + exponent
    w = lambert_w0(math.exp(y)) if y < 700.0 else _lambert_w0_log(y)
    return -w / (ls * k.kappa1) + 1.0 / (ls * gap)


def global_optimal_q2(cfg: ValidatedConfig, p2_mw: float) -> float:
    """Unconstrained q2 maximizing the secondary throughput (no congestion control).

    Requires P2/P1 < (d_s/d_p)^alpha (otherwise the objective may have
    several critical points and the closed form does not apply); the
    stationary point is clamped to [0, 1].
    """
    return min(max(_global_q2_unclamped(cfg, p2_mw), 0.0), 1.0)


@dataclass(frozen=True)
class FeasibleBound:
    """Largest q2 meeting stability and the delay cap (no congestion control).

    ``binding`` records which of the two logarithmic bounds is smaller;
    ``eta1`` is the service-rate level at which the average delay reaches
    exactly the cap.
    """

    q2_max: float
    binding: str  # "stability" | "delay"
    eta1: float


def eta1_root(lam: float, d_max: float) -> float:
    """Service rate at which (1-lam)/(mu-lam) + 1/mu equals d_max.

    The discriminant (d_max-1)^2 lam^2 - 4 lam + 4 is positive on the whole
    parameter rectangle lam in [0,1), d_max > 1, so the root is always real.
    """
    disc = (d_max - 1.0) ** 2 * lam**2 - 4.0 * lam + 4.0
    return ((d_max - 1.0) * lam + 2.0 + math.sqrt(disc)) / (2.0 * d_max)


def feasible_q2_bound(
    cfg: ValidatedConfig, p2_mw: float, lam: float, d: DelayConstraint
) -> FeasibleBound:
    """Feasible-region edge in q2 at fixed power, without congestion control."""
    p11 = phy.p_1_1(cfg)
    if not 0.0 < lam < p11:
        raise InvalidArrival(f"need 0 < lam < p_1_1 = {p11:.6f} for a stabilizable queue, got {lam}")
    k = kappa_constants(cfg, p2_mw)
    ls_k2 = cfg.geometry.lambda_s * k.kappa2
    eta1 = eta1_root(lam, d.d_max)
    stability = math.log(p11 / lam) / ls_k2
    delay = math.log(p11 / eta1) / ls_k2 if eta1 < p11 else 0.0
    if stability <= delay:
        bound, binding = stability, "stability"
    else:
        bound, binding = delay, "delay"
    if bound <= 0.0:
        raise NoFeasiblePoint(f"no q2 > 0 satisfies the delay cap {d.d_max} at p2={p2_mw}")
    return FeasibleBound(q2_max=bound, binding=binding, eta1=eta1)


@dataclass(frozen=True)
class OptimizationResult:
    """An optimizer answer: where, what it achieves, and which constraint won."""

    q2_star: float
    p2_star: float
    t_s_star: float
    binding: str  # "interior" | "stability" | "delay" | "unit-interval"
    method: str  # "closed-form" | "grid"


def constrained_optimal_q2(
    cfg: ValidatedConfig, p2_mw: float, lam: float, d: DelayConstraint
) -> OptimizationResult:
    """Delay-constrained optimal q2 at fixed power (no congestion control).

    The optimum is the smallest of the unconstrained stationary point and
    the two feasibility bounds; the ``binding`` tag records which.
    """
    raw = _global_q2_unclamped(cfg, p2_mw)
    q2o = min(max(raw, 0.0), 1.0)
    fb = feasible_q2_bound(cfg, p2_mw, lam, d)
    if fb.q2_max < q2o:
        q2_star, binding = fb.q2_max, fb.binding
    else:
        q2_star = q2o
        binding = "interior" if 0.0 < raw < 1.0 else "unit-interval"
    q1s = optimal_q1(cfg)
    ts, _, _, _ = metrics._terms(cfg, lam, q1s, q2_star, p2_mw, INFINITE)
    return OptimizationResult(
        q2_star=q2_star, p2_star=p2_mw, t_s_star=float(ts), binding=binding, method="closed-form"
    )


@dataclass(frozen=True)
class GridSpec:
    """Search grid: uniform in q2, log-spaced in P2 by default (the optima sit
    at small powers, where log spacing concentrates resolution)."""

    q2_steps: int = 200
    p2_steps: int = 200
    q2_range: tuple[float, float] = (0.0, 1.0)
    p2_range: tuple[float, float] | None = None  # default (p2_max/1000, p2_max)
    p2_log: bool = True

    def __post_init__(self):
        if self.q2_steps < 2 or self.p2_steps < 2:
            raise ValueError("grid resolutions must be >= 2")

    def axes(self, p2_max: float) -> tuple[np.ndarray, np.ndarray]:
        q2 = np.linspace(self.q2_range[0], self.q2_range[1], self.q2_steps)
        lo, hi = self.p2_range if self.p2_range is not None else (p2_max * 1e-3, p2_max)
        if not 0 < lo < hi:
            raise ValueError(f"bad p2 range ({lo}, {hi})")
        p2 = np.geomspace(lo, hi, self.p2_steps) if self.p2_log else np.linspace(lo, hi, self.p2_steps)
        return q2, p2


def grid_optimize(
    cfg: ValidatedConfig,
    lam: float,
    m: Finite,
    d: DelayConstraint,
    grid: GridSpec | None = None,
    with_surface: bool = False,
):
    """Exhaustive search of the throughput surface under the delay cap.

    Evaluates the secondary throughput at q1 = optimal_q1 over the grid,
    keeps points with average delay strictly below d_max, and returns the
    argmax; ties break deterministically toward the smallest P2, then the
    smallest q2.  With ``with_surface``, also returns every evaluated cell
    as rows (q2, p2_mw, t_s, delay, feasible).
    """
    if not isinstance(m, Finite):
        raise TypeError("grid_optimize handles finite congestion thresholds; use constrained_optimal_q2")
    mu2 = phy.p_1_1(cfg)
    if not lam < mu2:
        raise Unstable(f"lam={lam} >= p_1_1={mu2:.6f}: queue unstable for every q2")
    grid = grid or GridSpec()
    q1s = optimal_q1(cfg)
    q2_axis, p2_axis = grid.axes(cfg.channel.p2_max_mw)

    best = None  # (t_s, q2, p2, delay)
    surface = [] if with_surface else None
    for p2 in p2_axis:
        ts, delay, _, _ = metrics._terms(cfg, lam, q1s, q2_axis, float(p2), m)
        feas = delay < d.d_max
        if surface is not None:
            for j in range(q2_axis.size):
                surface.append((float(q2_axis[j]), float(p2), float(ts[j]), float(delay[j]), bool(feas[j])))
        if not feas.any():
            continue
        ts_f = np.where(feas, ts, -np.inf)
        j = int(np.argmax(ts_f))  # first max: smallest q2 among equals
        if best is None or ts_f[j] > best[0]:
            best = (float(ts_f[j]), float(q2_axis[j]), float(p2), float(delay[j]), j)
    if best is None:
        raise NoFeasiblePoint("the delay constraint excludes every grid point")

    ts_star, q2_star, p2_star, delay_star, j_star = best
    if q2_star == q2_axis[-1]:
        binding = "unit-interval"
    else:
        # delay-bound if the next q2 step at the same power is infeasible
        _, dnext, _, _ = metrics._terms(cfg, lam, q1s, float(q2_axis[j_star + 1]), p2_star, m)
        binding = "delay" if not float(dnext) < d.d_max else "interior"
    result = OptimizationResult(
        q2_star=q2_star, p2_star=p2_star, t_s_star=ts_star, binding=binding, method="grid"
    )
    if with_surface:
        return result, surface
    return result
