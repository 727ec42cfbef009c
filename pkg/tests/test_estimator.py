import numpy as np
import pytest

from cvqkd.errors import CalibrationError, EstimationError
from cvqkd.estimator import (
    calibrate_shot_noise,
    cross_check,
    estimate_params,
    estimate_t_from_test,
    lo_level_ok,
)
from cvqkd.rates import Modulation
from cvqkd.simkit import (
    Attack,
    AttackModel,
    BlockSpec,
    modulate_block,
    sift,
    probe_pulse_pairs,
    transmit_measure,
)

from conftest import EPS25, ETA25, T25, VA25, VEL25


def _pairs(n, rng, t=T25, eps=EPS25):
    g = np.sqrt(ETA25 * t)
    sz = np.sqrt(1 + VEL25 + ETA25 * t * eps)
    a = rng.normal(0, np.sqrt(VA25), n)
    b = g * a + rng.normal(0, sz, n)
    return a, b


class TestCalibration:
    def test_unit_scale(self):
        rng = np.random.default_rng(0)
        v = rng.normal(0, np.sqrt(1.041), 1_000_000)
        n0, se = calibrate_shot_noise(v, VEL25)
        assert n0 == pytest.approx(1.0, abs=0.005)
        assert se < 0.005

    def test_degenerate_input(self):
        with pytest.raises(CalibrationError):
            calibrate_shot_noise(np.zeros(10_000), VEL25)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(1)
        v = rng.normal(0, np.sqrt(1.041), 100_000)
        n0, _ = calibrate_shot_noise(v, VEL25)
        n0x4, _ = calibrate_shot_noise(2.0 * v, VEL25)
        assert n0x4 == pytest.approx(4.0 * n0, rel=1e-12)

    def test_too_few_samples(self):
        with pytest.raises(CalibrationError):
            calibrate_shot_noise(np.ones(100), VEL25)


class TestEstimateParams:
    def test_paper_point(self):
        rng = np.random.default_rng(2)
        a, b = _pairs(5_000, rng)
        est = estimate_params(a, b, ETA25, VEL25, VA25, seed=0)
        assert est.t_hat == pytest.approx(T25, abs=3 * est.t_stderr)
        assert est.eps_hat == pytest.approx(EPS25, abs=3 * est.eps_stderr)
        assert est.sample_count == 5_000

    def test_identity_channel_plus_shot_noise(self):
        rng = np.random.default_rng(3)
        a = rng.normal(0, 1.0, 50_000)
        b = a + rng.normal(0, 1.0, 50_000)
        est = estimate_params(a, b, 1.0, 0.0, 1.0, seed=0)
        assert est.t_hat == pytest.approx(1.0, abs=3 * est.t_stderr)
        assert est.eps_hat == pytest.approx(0.0, abs=3 * est.eps_stderr)

    def test_intercept_resend_reads_two_units(self, paper_models):
        mod, ch, det = paper_models
        spec = BlockSpec(100_000, 1_000, 50_000, seed=5)
        block = transmit_measure(modulate_block(spec, mod), ch, det,
                                 AttackModel(Attack.INTERCEPT_RESEND), seed=6)
        a, b, reveal = sift(block)
        est = estimate_params(a[reveal], b[reveal], ETA25, VEL25, VA25, seed=0)
        assert est.eps_hat == pytest.approx(2.0 + EPS25, abs=0.1)

    def test_order_invariance(self):
        rng = np.random.default_rng(4)
        a, b = _pairs(4_000, rng)
        est1 = estimate_params(a, b, ETA25, VEL25, VA25, n_bootstrap=0 or 5, seed=9)
        perm = rng.permutation(4_000)
        est2 = estimate_params(a[perm], b[perm], ETA25, VEL25, VA25,
                               n_bootstrap=5, seed=9)
        assert est1.t_hat == pytest.approx(est2.t_hat, rel=1e-12)
        assert est1.eps_hat == pytest.approx(est2.eps_hat, rel=1e-9)

    def test_consistency_bands_shrink(self):
        # spread shrinks ~ sqrt(10) per decade of sample size
        rng = np.random.default_rng(5)
        spreads = []
        for n in (1_000, 10_000, 100_000):
            eps_hats = [estimate_params(*_pairs(n, rng), ETA25, VEL25, VA25,
                                        n_bootstrap=5, seed=0).eps_hat
                        for _ in range(40)]
            spreads.append(np.std(eps_hats))
        assert spreads[0] / spreads[1] == pytest.approx(np.sqrt(10), rel=0.45)
        assert spreads[1] / spreads[2] == pytest.approx(np.sqrt(10), rel=0.45)

    def test_too_few_pairs(self):
        rng = np.random.default_rng(6)
        a, b = _pairs(500, rng)
        with pytest.raises(EstimationError):
            estimate_params(a, b, ETA25, VEL25, VA25)

    def test_negative_eps_retained(self):
        # a clean channel with slightly optimistic noise draw can go negative;
        # the estimator must report it rather than clip
        rng = np.random.default_rng(11)
        g = np.sqrt(ETA25 * T25)
        a = rng.normal(0, np.sqrt(VA25), 20_000)
        b = g * a + rng.normal(0, np.sqrt(0.98 * (1 + VEL25)), 20_000)
        est = estimate_params(a, b, ETA25, VEL25, VA25, seed=0)
        assert est.eps_hat < 0.0


class TestCrossCheck:
    def test_identical_estimates(self):
        assert cross_check(0.302, 0.004, 0.302, 0.004)

    def test_gross_mismatch(self):
        assert not cross_check(0.302, 0.004, 0.151, 0.004)

    def test_false_alarm_rate(self, paper_models):
        # honest channel: both estimators target the same T; alarms <= 1%-ish
        mod, ch, det = paper_models
        alarms = 0
        trials = 300
        for k in range(trials):
            spec = BlockSpec(14_000, 2_000, 6_000, seed=1_000 + k)
            block = transmit_measure(modulate_block(spec, mod), ch, det,
                                     seed=2_000 + k)
            a, b, reveal = sift(block)
            est = estimate_params(a[reveal], b[reveal], ETA25, VEL25, VA25,
                                  n_bootstrap=5, seed=0)
            ta, tb = probe_pulse_pairs(block)
            t_test, t_test_se = estimate_t_from_test(ta, tb, ETA25)
            if not cross_check(est.t_hat, est.t_stderr, t_test, t_test_se, 3.0):
                alarms += 1
        assert alarms <= 0.02 * trials

    def test_detects_skewed_test_estimate(self, paper_models):
        mod, ch, det = paper_models
        spec = BlockSpec(14_000, 2_000, 6_000, seed=31)
        block = transmit_measure(modulate_block(spec, mod), ch, det, seed=32)
        a, b, reveal = sift(block)
        est = estimate_params(a[reveal], b[reveal], ETA25, VEL25, VA25, seed=0)
        ta, tb = probe_pulse_pairs(block)
        t_test, t_test_se = estimate_t_from_test(ta, tb, ETA25)
        assert not cross_check(est.t_hat, est.t_stderr, 0.5 * t_test, t_test_se)


class TestTestPulseEstimate:
    def test_recovers_transmission(self, paper_models):
        mod, ch, det = paper_models
        spec = BlockSpec(52_000, 50_000, 1_000, seed=21)
        block = transmit_measure(modulate_block(spec, mod), ch, det, seed=22)
        ta, tb = probe_pulse_pairs(block)
        t_hat, se = estimate_t_from_test(ta, tb, ETA25)
        assert t_hat == pytest.approx(T25, abs=3 * se)
        assert se < 0.02

    def test_zero_amplitude_rejected(self):
        with pytest.raises(EstimationError):
            estimate_t_from_test(np.zeros(100), np.ones(100), ETA25)


class TestLoMonitor:
    def test_nominal_ok(self):
        assert lo_level_ok(1.0)
        assert lo_level_ok(1.03)

    def test_drift_alarms(self):
        assert not lo_level_ok(0.9)
        assert not lo_level_ok(1.2)
