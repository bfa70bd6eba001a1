import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

import sharedaccess as sa
from sharedaccess.phy import _mean_distance_gl
from conftest import table1_channel, table1_config, table1_geometry


class TestSinc:
    def test_half(self):
        assert sa.sinc_norm(0.5) == pytest.approx(2.0 / math.pi, rel=1e-15)

    def test_two_thirds(self):
        # oracle: sin(2*pi/3) / (2*pi/3) evaluated directly
        assert sa.sinc_norm(2.0 / 3.0) == pytest.approx(0.4134966716, rel=1e-9)

    def test_limit_toward_zero(self):
        assert sa.sinc_norm(1e-9) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("x", [0.0, 1.0, -0.5, 2.0])
    def test_domain(self, x):
        with pytest.raises(sa.DomainError):
            sa.sinc_norm(x)


class TestCase3:
    def test_table1_value(self, cfg):
        # reference point quoted at 0.9997
        assert sa.p_1_1(cfg) == pytest.approx(0.9997, abs=5e-5)

    def test_noise_free(self):
        ch = sa.ChannelParams(alpha=4.0, theta=1.0, noise_mw=0.0, p1_mw=100.0, p2_max_mw=0.02)
        cfg = sa.validate(ch, table1_geometry(), table1_config().protocol)
        assert sa.p_1_1(cfg) == 1.0

    def test_vanishes_for_huge_threshold(self):
        ch = sa.ChannelParams(alpha=4.0, theta=1e12, noise_mw=sa.dbm_to_mw(-113.97), p1_mw=100.0, p2_max_mw=0.02)
        cfg = sa.validate(ch, table1_geometry(), table1_config().protocol)
        assert sa.p_1_1(cfg) < 1e-10


class TestCase1:
    def test_no_interference_no_noise(self):
        ch = sa.ChannelParams(alpha=4.0, theta=1.0, noise_mw=0.0, p1_mw=100.0, p2_max_mw=0.02)
        cfg = sa.validate(ch, table1_geometry(), table1_config().protocol)
        assert sa.p_2_2(0.0, cfg) == 1.0

    def test_value_at_optimal_access(self, cfg):
        # at the interior optimum the field exponent is exactly 1 by the
        # first-order condition, so p_2_2 = e^-1 * noise factor
        q1s = sa.optimal_q1(cfg)
        noise = math.exp(-cfg.channel.noise_mw * cfg.geometry.d_s**4 / 0.01)
        assert sa.p_2_2(q1s, cfg, 0.01) == pytest.approx(math.exp(-1.0) * noise, rel=1e-12)
        assert sa.p_2_2(q1s, cfg, 0.01) == pytest.approx(0.3675, abs=2e-4)

    def test_log_affine_in_q1(self, cfg):
        # the exponent is linear in q1, so log p_2_2 has a constant slope
        q = np.linspace(0.05, 0.95, 19)
        slopes = np.diff(np.log(sa.p_2_2(q, cfg))) / np.diff(q)
        assert np.all(np.abs(slopes / slopes[0] - 1.0) < 1e-10)


class TestCase2Primary:
    def test_silent_secondaries_reduce_to_case3(self, cfg):
        assert sa.p_1_12(0.0, 0.01, cfg) == pytest.approx(sa.p_1_1(cfg), rel=1e-15)

    def test_strictly_decreasing_in_q2(self, cfg):
        assert sa.p_1_12(0.2, 0.01, cfg) > sa.p_1_12(0.8, 0.01, cfg)
        assert sa.p_1_12(0.2, 0.01, cfg) < sa.p_1_1(cfg)

    def test_grid_dominance(self, cfg):
        q = np.linspace(0.0, 1.0, 100)
        assert np.all(sa.p_1_12(q, 0.01, cfg) <= sa.p_1_1(cfg) + 1e-15)


class TestMeanDistance:
    def test_pt_at_center(self):
        # d_p -> 0 collapses the integrand to r: mean = 2R/3
        assert _mean_distance_gl(1e-9, 500.0) == pytest.approx(2 * 500.0 / 3.0, rel=1e-8)

    def test_receiver_disk_shrinks_to_origin(self):
        assert _mean_distance_gl(300.0, 1e-3) == pytest.approx(300.0, rel=1e-6)

    def test_table1_bounds_and_value(self, cfg):
        v = sa.expected_pt_to_sr_distance(cfg)
        assert 2 * 500.0 / 3.0 < v < 300.0 + 500.0
        # independent oracles: adaptive quadrature on the same integral
        f = lambda r, phi: (2 * r / 500.0**2) / (2 * math.pi) * math.sqrt(
            r * r + 300.0**2 - 2 * r * 300.0 * math.cos(phi)
        )
        ref, err = integrate.dblquad(f, 0, 2 * math.pi, 0, 500.0, epsabs=1e-9, epsrel=1e-9)
        assert v == pytest.approx(ref, rel=1e-7)

    def test_monte_carlo_oracle(self, cfg):
        # 1e7 samples with r ~ triangular(0, R) (the disk radius law) and
        # uniform angle, per-sample law of cosines
        rng = np.random.default_rng(20240817)
        n = 10_000_000
        r = 500.0 * np.sqrt(rng.random(n))
        phi = rng.random(n) * 2 * np.pi
        mc = np.sqrt(r * r + 300.0**2 - 2 * r * 300.0 * np.cos(phi)).mean()
        assert sa.expected_pt_to_sr_distance(cfg) == pytest.approx(mc, rel=1e-3)

    def test_memoized(self, cfg):
        assert sa.expected_pt_to_sr_distance(cfg) is not None
        import time

        t0 = time.perf_counter()
        for _ in range(100):
            sa.expected_pt_to_sr_distance(cfg)
        assert time.perf_counter() - t0 < 0.05  # cache hits, no re-integration


class TestCase2Secondary:
    def test_dominated_by_case1_pointwise(self, cfg):
        q = np.linspace(0.0, 1.0, 100)
        assert np.all(sa.p_2_12(q, 0.01, cfg) < sa.p_2_2(q, cfg, 0.01))

    def test_primary_power_vanishes_limit(self):
        ch = sa.ChannelParams(alpha=4.0, theta=1.0, noise_mw=sa.dbm_to_mw(-113.97), p1_mw=1e-12, p2_max_mw=0.02)
        pr = sa.ProtocolParams(lam=0.3, q1=0.5, q2=0.5, m=sa.Finite(3), p2_mw=0.01)
        cfg = sa.validate(ch, table1_geometry(), pr)
        assert sa.p_2_12(0.5, 0.01, cfg) == pytest.approx(float(sa.p_2_2(0.5, cfg, 0.01)), rel=1e-6)

    def test_probability_bounds(self, cfg):
        for q2 in (0.0, 0.3, 1.0):
            for p2 in (1e-4, 0.01, 0.02):
                v = sa.p_2_12(q2, p2, cfg)
                assert 0.0 < v <= 1.0


def _exact_primary_penalty_factor(theta, p1, p2, alpha, d_s, d_p, radius):
    """Exact disk average of the primary-interference success factor
    E[1/(1 + theta (P1/P2) (d_s/d)^alpha)] for a receiver uniform on the disk."""
    kap = theta * (p1 / p2) * d_s**alpha

    def inner(r):
        g = lambda phi: 1.0 / (
            1.0 + kap * (r * r + d_p * d_p - 2 * r * d_p * math.cos(phi)) ** (-alpha / 2.0)
        )
        val, _ = integrate.quad(g, 0, 2 * math.pi, epsabs=1e-10, epsrel=1e-10, limit=200)
        return (2 * r / radius**2) / (2 * math.pi) * val

    val, _ = integrate.quad(inner, 0, radius, epsabs=1e-9, epsrel=1e-9, limit=200)
    return val


@pytest.mark.slow
def test_case2_secondary_empirical_vs_exact_and_approximate(cfg):
    """Monte Carlo cross-check of the Case 2 secondary success probability.

    The simulator estimate must agree with the exact semi-analytic value
    (interference field factor times the exact disk-averaged primary
    penalty) within 3 standard errors over >= 1e5 slot-samples.  The closed
    form is an approximation (mean-distance collapse plus uniform receiver
    positions); its gap is reported here, not hidden: it exceeds the Monte
    Carlo error by design of the check.
    """
    q2, p2 = 0.5, 0.01
    est = sa.empirical_success_probs(cfg, q1=sa.optimal_q1(cfg), q2=q2, p2_mw=p2, slots=100_000, seed=7)
    emp = est.p_2_12

    g, c = cfg.geometry, cfg.channel
    field = math.exp(-q2 * g.lambda_s * math.pi * g.d_s**2 / sa.sinc_norm(0.5))
    noise = math.exp(-c.theta * c.noise_mw * g.d_s**4 / p2)
    exact = field * noise * _exact_primary_penalty_factor(
        c.theta, c.p1_mw, p2, c.alpha, g.d_s, g.d_p, g.radius
    )
    assert emp.n >= 100_000
    assert abs(emp.value - exact) < 3 * emp.se

    approx = sa.p_2_12(q2, p2, cfg)
    gap = approx / emp.value - 1.0
    print(f"\ncase-2 secondary: empirical={emp.value:.5f}+-{emp.se:.5f}, exact={exact:.5f}, "
          f"closed-form={approx:.5f} (gap {gap:+.2%})")
    assert abs(gap) < 0.15  # sanity band; the gap itself is the reported quantity

    # the empirical route of p_2_12 is the same estimator
    via_flag = sa.p_2_12(q2, p2, cfg, method="empirical", slots=20_000, seed=3)
    assert 0.0 < via_flag < 1.0
    assert abs(via_flag - exact) < 0.02

    # Case 1 measurement from the same run validates the field-only factor
    emp22 = est.p_2_2
    closed22 = float(sa.p_2_2(sa.optimal_q1(cfg), cfg, p2))
    assert abs(emp22.value - closed22) < 3 * emp22.se + 1e-4

    # Case 2 primary from the same run
    emp112 = est.p_1_12
    closed112 = float(sa.p_1_12(q2, p2, cfg))
    assert abs(emp112.value - closed112) < 3 * math.sqrt(closed112 * (1 - closed112) / emp112.n)


@given(
    alpha=st.floats(min_value=2.1, max_value=6.0),
    theta_db=st.floats(min_value=-10.0, max_value=15.0),
    q=st.floats(min_value=0.0, max_value=1.0),
    p2=st.floats(min_value=1e-4, max_value=0.02),
)
def test_probability_ranges(alpha, theta_db, q, p2):
    ch = sa.ChannelParams(
        alpha=alpha, theta=sa.db_to_linear(theta_db), noise_mw=sa.dbm_to_mw(-113.97), p1_mw=100.0, p2_max_mw=0.02
    )
    pr = sa.ProtocolParams(lam=0.3, q1=q, q2=q, m=sa.Finite(3), p2_mw=p2)
    cfg = sa.validate(ch, table1_geometry(), pr)
    probs = sa.success_probabilities(cfg)
    for v in (probs.p_2_2, probs.p_1_12, probs.p_2_12, probs.p_1_1):
        assert 0.0 < v <= 1.0
    assert probs.p_1_1 >= probs.p_1_12
    assert probs.p_2_2 >= probs.p_2_12
