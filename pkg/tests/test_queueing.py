import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

import sharedaccess as sa
from sharedaccess.queueing import ServiceRates, analyze, is_stable, occupancy, stationary, xi_ratio
from dtmc_oracle import oracle_stationary, oracle_summary


class TestStability:
    def test_high_arrival_with_congestion_control(self):
        assert is_stable(0.99, ServiceRates(0.6, 0.9997), sa.Finite(3))

    def test_infinite_threshold_needs_mu1(self):
        assert not is_stable(0.5, ServiceRates(0.4, 0.9), sa.INFINITE)

    def test_finite_threshold_needs_only_mu2(self):
        assert is_stable(0.5, ServiceRates(0.4, 0.9), sa.Finite(1))

    def test_unstable_raises(self):
        with pytest.raises(sa.Unstable):
            analyze(0.95, ServiceRates(0.4, 0.9), sa.Finite(2))
        with pytest.raises(sa.Unstable):
            stationary(0.5, ServiceRates(0.4, 0.9), sa.INFINITE)


class TestStationary:
    def test_no_arrivals(self):
        dist = stationary(0.0, ServiceRates(0.6, 0.95), sa.Finite(3))
        assert dist.pi0 == 1.0
        assert np.all(dist.pmf(np.arange(1, 10)) == 0.0)

    def test_lhopital_branch_exact_value(self):
        # lam == mu1: pi0 = (mu2-mu1) / (mu1 + (mu2-mu1)(M+1-mu1)/(1-mu1)),
        # exact substitution gives 0.16 for (0.5, 0.9, M=2)
        dist = stationary(0.5, ServiceRates(0.5, 0.9), sa.Finite(2))
        assert dist.pi0 == pytest.approx(0.16, rel=1e-12)

    def test_full_vector_matches_power_iteration(self):
        lam, mu1, mu2, M = 0.3, 0.6, 0.95, 3
        ref = oracle_stationary(lam, mu1, mu2, M, n_states=200)
        dist = stationary(lam, ServiceRates(mu1, mu2), sa.Finite(M))
        mine = np.asarray(dist.pmf(np.arange(ref.size)))
        assert np.abs(mine - ref).sum() < 1e-8

    def test_infinite_threshold_vector(self):
        lam, mu1 = 0.3, 0.6
        dist = stationary(lam, ServiceRates(mu1, 0.95), sa.INFINITE)
        assert dist.pi0 == pytest.approx(1 - lam / mu1, rel=1e-14)
        i = np.arange(0, 400)
        total = float(np.sum(dist.pmf(i)))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_continuity_at_removable_singularity(self):
        # the rational form evaluated just off lam == mu1 brackets the
        # l'Hopital value (pi0 is monotone decreasing in lam)
        rates = ServiceRates(0.5, 0.9)
        mid = stationary(0.5, rates, sa.Finite(2)).pi0
        lo = stationary(0.5 + 1e-7, rates, sa.Finite(2)).pi0
        hi = stationary(0.5 - 1e-7, rates, sa.Finite(2)).pi0
        assert lo <= mid <= hi
        assert hi - lo < 1e-6


class TestOccupancy:
    def test_no_arrivals(self):
        assert occupancy(0.0, ServiceRates(0.6, 0.95), sa.Finite(3)) == (0.0, 0.0)

    def test_matches_partial_sums_of_oracle(self):
        lam, mu1, mu2, M = 0.3, 0.6, 0.95, 3
        ref = oracle_stationary(lam, mu1, mu2, M)
        pmid, pab = occupancy(lam, ServiceRates(mu1, mu2), sa.Finite(M))
        idx = np.arange(ref.size)
        assert pmid == pytest.approx(ref[(idx >= 1) & (idx <= M)].sum(), abs=1e-8)
        assert pab == pytest.approx(ref[idx > M].sum(), abs=1e-8)

    def test_large_threshold_recovers_no_control_occupancy(self):
        lam, mu1 = 0.3, 0.6
        pmid, pab = occupancy(lam, ServiceRates(mu1, 0.95), sa.Finite(300))
        assert pab < 1e-30
        assert pmid == pytest.approx(lam / mu1, rel=1e-12)

    def test_degenerate_xi_refused(self):
        with pytest.raises(sa.DegenerateXi):
            occupancy(0.5, ServiceRates(0.5, 0.9), sa.Finite(2))

    def test_normalization(self):
        lam, mu1, mu2, M = 0.42, 0.55, 0.93, 5
        dist = stationary(lam, ServiceRates(mu1, mu2), sa.Finite(M))
        pmid, pab = occupancy(lam, ServiceRates(mu1, mu2), sa.Finite(M))
        assert dist.pi0 + pmid + pab == pytest.approx(1.0, abs=1e-12)


class TestAnalyze:
    def test_perfect_service_no_control(self):
        qa = analyze(0.5, ServiceRates(1.0, 1.0), sa.INFINITE)
        assert qa.q_bar == pytest.approx(0.5, rel=1e-14)
        assert qa.delay == pytest.approx(2.0, rel=1e-14)

    def test_against_matrix_oracle(self):
        lam, mu1, mu2, M = 0.3, 0.6, 0.95, 3
        qa = analyze(lam, ServiceRates(mu1, mu2), sa.Finite(M))
        pi0, pmid, pab, qbar, delay = oracle_summary(lam, mu1, mu2, M)
        assert qa.pi0 == pytest.approx(pi0, rel=1e-6)
        assert qa.prob_mid == pytest.approx(pmid, rel=1e-6)
        assert qa.prob_above == pytest.approx(pab, rel=1e-6)
        assert qa.q_bar == pytest.approx(qbar, rel=1e-6)
        assert qa.delay == pytest.approx(delay, rel=1e-6)

    def test_congested_regime_against_oracle(self):
        # mu1 < lam < mu2: xi > 1, exercised via the rescaled branch
        lam, mu1, mu2, M = 0.7, 0.45, 0.95, 4
        qa = analyze(lam, ServiceRates(mu1, mu2), sa.Finite(M))
        pi0, pmid, pab, qbar, delay = oracle_summary(lam, mu1, mu2, M)
        assert qa.pi0 == pytest.approx(pi0, rel=1e-6)
        assert qa.q_bar == pytest.approx(qbar, rel=1e-6)
        assert qa.delay == pytest.approx(delay, rel=1e-6)

    def test_large_threshold_no_overflow(self):
        # xi > 1 with M = 10^4 overflows xi^M unless rescaled; pi0 itself is
        # ~xi^-M, far below the subnormal range, so 0.0 is its correct value
        qa = analyze(0.5, ServiceRates(0.3, 0.9), sa.Finite(10_000))
        assert 0.0 <= qa.pi0 < 1e-300
        assert math.isfinite(qa.q_bar) and math.isfinite(qa.delay)
        assert qa.pi0 + qa.prob_mid + qa.prob_above == pytest.approx(1.0, abs=1e-9)
        # and xi < 1 with a huge threshold degrades to the no-control forms
        qa2 = analyze(0.3, ServiceRates(0.6, 0.95), sa.Finite(10_000))
        no_ctrl = analyze(0.3, ServiceRates(0.6, 0.95), sa.INFINITE)
        assert qa2.q_bar == pytest.approx(no_ctrl.q_bar, rel=1e-12)

    def test_zero_arrival_delay_contract(self):
        with pytest.raises(sa.ZeroArrival):
            analyze(0.0, ServiceRates(0.6, 0.95), sa.Finite(3))
        qa = analyze(0.0, ServiceRates(0.6, 0.95), sa.Finite(3), require_delay=False)
        assert qa.delay is None
        assert qa.pi0 == 1.0
        assert qa.mu_bar_defaulted and qa.mu_bar == 0.95

    def test_delay_floor(self):
        qa = analyze(0.3, ServiceRates(0.6, 0.95), sa.Finite(3))
        assert qa.delay >= 1.0 + 1.0 / 0.95


@st.composite
def stable_tuples(draw):
    mu2 = draw(st.floats(min_value=0.1, max_value=1.0))
    mu1 = draw(st.floats(min_value=0.05, max_value=1.0))
    assume(mu1 <= mu2)
    lam = draw(st.floats(min_value=0.01, max_value=0.999)) * 0.9 * mu2
    m = draw(st.integers(min_value=1, max_value=20))
    # keep the oracle's truncated tail well-conditioned
    assume(lam * (1 - mu2) / ((1 - lam) * mu2) < 0.9)
    assume(abs(lam - mu1) > 1e-4)
    return lam, mu1, mu2, m


@given(stable_tuples())
def test_closed_forms_match_oracle_randomized(params):
    lam, mu1, mu2, m = params
    qa = analyze(lam, ServiceRates(mu1, mu2), sa.Finite(m))
    pi0, pmid, pab, qbar, delay = oracle_summary(lam, mu1, mu2, m)
    assert qa.pi0 == pytest.approx(pi0, rel=1e-6, abs=1e-9)
    assert qa.prob_mid == pytest.approx(pmid, rel=1e-6, abs=1e-9)
    assert qa.prob_above == pytest.approx(pab, rel=1e-6, abs=1e-9)
    assert qa.q_bar == pytest.approx(qbar, rel=1e-6, abs=1e-9)
    assert qa.delay == pytest.approx(delay, rel=1e-6)
    assert qa.delay >= 1.0 + 1.0 / mu2 - 1e-12
    assert qa.pi0 + qa.prob_mid + qa.prob_above == pytest.approx(1.0, abs=1e-9)


class TestDelayShapeOverAccessProbability:
    """Delay as a function of q2 through mu1 = p_1_12(q2): the queue slows
    down as the secondary field densifies."""

    @staticmethod
    def _delay(cfg, lam, q2, M):
        mu1 = float(sa.p_1_12(q2, 0.01, cfg))
        return analyze(lam, ServiceRates(mu1, sa.p_1_1(cfg)), sa.Finite(M)).delay

    def test_monotone_nondecreasing_in_q2(self, cfg):
        for lam, M in [(0.3, 1), (0.3, 3), (0.9, 1), (0.6, 9)]:
            d = [self._delay(cfg, lam, q2, M) for q2 in np.linspace(0.0, 1.0, 60)]
            assert all(b >= a - 1e-12 for a, b in zip(d, d[1:])), (lam, M)

    def test_saturating_shape(self, cfg):
        # increments shrink once the congestion guard dominates
        d = [self._delay(cfg, 0.9, q2, 1) for q2 in np.linspace(0.0, 1.0, 21)]
        early = d[4] - d[0]
        late = d[20] - d[16]
        assert late < early

    def test_high_vs_low_arrival_crossing(self, cfg):
        # with M=1 the heavier-arrival queue is slower at small q2 but
        # faster at large q2 (congestion silencing kicks in); the curves
        # cross in the vicinity of q2 ~ 0.46
        diff = lambda q2: self._delay(cfg, 0.9, q2, 1) - self._delay(cfg, 0.3, q2, 1)
        assert diff(0.30) > 0
        assert diff(0.60) < 0
        lo, hi = 0.30, 0.60
        while hi - lo > 1e-4:
            mid = 0.5 * (lo + hi)
            if diff(mid) > 0:
                lo = mid
            else:
                hi = mid
        assert 0.40 <= lo <= 0.52

    def test_independent_of_q1(self, cfg):
        # q1 never enters the service rates
        mu1 = float(sa.p_1_12(0.5, 0.01, cfg))
        rates = ServiceRates(mu1, sa.p_1_1(cfg))
        d = analyze(0.3, rates, sa.Finite(3)).delay
        for q1 in (0.0, 0.5, 1.0):
            rep = sa.secondary_throughput(
                cfg, sa.ProtocolParams(lam=0.3, q1=q1, q2=0.5, m=sa.Finite(3), p2_mw=0.01)
            )
            assert rep.delay == pytest.approx(d, rel=1e-12)
