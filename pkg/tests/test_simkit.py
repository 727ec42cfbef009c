import numpy as np
import pytest

from cvqkd.errors import ModelError
from cvqkd.rates import ChannelModel, DetectorModel, Modulation
from cvqkd.simkit import (
    ROLE_KEY,
    ROLE_REVEAL,
    ROLE_TEST,
    Attack,
    AttackModel,
    BlockSpec,
    modulate_block,
    read_block,
    sift,
    probe_pulse_pairs,
    transmit_measure,
    write_block,
)

from conftest import ETA25, T25, VA25, VEL25, EPS25


def _big_block(seed=3, total=1_000_000, test=10_000, reveal=5_000):
    spec = BlockSpec(total, test, reveal, seed=seed)
    return modulate_block(spec, Modulation(VA25))


class TestModulate:
    def test_key_pulse_variance(self):
        block = _big_block()
        key = block.roles == ROLE_KEY
        var_x = block.alice_x[key].var()
        var_p = block.alice_p[key].var()
        # 3 sigma band of the chi^2 sampling distribution at ~1e6 samples
        assert 18.3 < var_x < 18.7
        assert 18.3 < var_p < 18.7

    def test_zero_modulation(self):
        spec = BlockSpec(5_000, 500, 500, seed=1)
        block = modulate_block(spec, Modulation(0.0))
        assert np.all(block.alice_x == 0.0)
        assert np.all(block.alice_p == 0.0)

    def test_deterministic(self):
        spec = BlockSpec(20_000, 2_000, 2_000, seed=42)
        b1 = modulate_block(spec, Modulation(VA25))
        b2 = modulate_block(spec, Modulation(VA25))
        assert np.array_equal(b1.alice_x, b2.alice_x)
        assert np.array_equal(b1.alice_p, b2.alice_p)
        assert np.array_equal(b1.roles, b2.roles)

    def test_role_partition(self):
        spec = BlockSpec(20_000, 2_000, 3_000, seed=7)
        block = modulate_block(spec, Modulation(VA25))
        counts = np.bincount(block.roles, minlength=3)
        assert counts[ROLE_TEST] == 2_000
        assert counts[ROLE_REVEAL] == 3_000
        assert counts[ROLE_KEY] == spec.key_pulses

    def test_test_pattern(self):
        block = modulate_block(BlockSpec(10_000, 1_000, 1_000, seed=5),
                               Modulation(VA25))
        amp = np.sqrt(VA25)
        idx = np.arange(1_000)
        assert np.allclose(block.alice_x[:1_000], np.where(idx % 2 == 0, amp, 0.0))
        assert np.allclose(block.alice_p[:1_000], np.where(idx % 2 == 0, 0.0, amp))

    def test_bad_spec(self):
        with pytest.raises(ModelError):
            BlockSpec(1_000, 600, 500)


class TestTransmitMeasure:
    def test_bob_variance_at_paper_point(self, paper_models):
        mod, ch, det = paper_models
        block = _big_block()
        block = transmit_measure(block, ch, det, seed=9)
        # Var(b) = eta T V_A + eta T eps + 1 + v_el
        expected = ETA25 * T25 * VA25 + ETA25 * T25 * EPS25 + 1 + VEL25
        assert expected == pytest.approx(4.427, abs=1e-3)
        key = block.roles == ROLE_KEY
        assert block.bob_outcome[key].var() == pytest.approx(expected, abs=0.03)

    def test_pure_shot_noise(self):
        spec = BlockSpec(1_000_000, 1_000, 1_000, seed=2)
        block = modulate_block(spec, Modulation(0.0))
        block = transmit_measure(block, ChannelModel(1.0, 0.0),
                                 DetectorModel(1.0, 0.0), seed=3)
        assert block.bob_outcome.var() == pytest.approx(1.0, abs=0.005)

    def test_covariance_structure(self, paper_models):
        mod, ch, det = paper_models
        block = transmit_measure(_big_block(), ch, det, seed=11)
        a, b, _ = sift(block)
        cov = np.mean(a * b) - a.mean() * b.mean()
        assert cov == pytest.approx(np.sqrt(ETA25 * T25) * VA25, abs=0.1)

    def test_intercept_resend_adds_two_units(self, paper_models):
        mod, ch, det = paper_models
        block = transmit_measure(_big_block(seed=8), ch, det,
                                 AttackModel(Attack.INTERCEPT_RESEND), seed=12)
        key = block.roles == ROLE_KEY
        expected = ETA25 * T25 * (VA25 + EPS25 + 2.0) + 1 + VEL25
        assert block.bob_outcome[key].var() == pytest.approx(expected, abs=0.03)

    def test_deterministic(self, paper_models):
        mod, ch, det = paper_models
        spec = BlockSpec(20_000, 2_000, 2_000, seed=4)
        b1 = transmit_measure(modulate_block(spec, mod), ch, det, seed=77)
        b2 = transmit_measure(modulate_block(spec, mod), ch, det, seed=77)
        assert np.array_equal(b1.bob_outcome, b2.bob_outcome)
        assert np.array_equal(b1.bob_choice, b2.bob_choice)


class TestSift:
    def test_excludes_test_pulses(self, paper_models):
        mod, ch, det = paper_models
        spec = BlockSpec(20_000, 2_000, 3_000, seed=6)
        block = transmit_measure(modulate_block(spec, mod), ch, det, seed=1)
        a, b, reveal = sift(block)
        assert len(a) == len(b) == spec.key_pulses + spec.reveal_pulses
        assert reveal.sum() == spec.reveal_pulses

    def test_choice_selects_quadrature(self, paper_models):
        mod, ch, det = paper_models
        spec = BlockSpec(5_000, 500, 500, seed=6)
        block = transmit_measure(modulate_block(spec, mod), ch, det, seed=2)
        block.bob_choice[:] = 0
        a, _, _ = sift(block)
        keep = block.roles != ROLE_TEST
        assert np.array_equal(a, block.alice_x[keep])
        block.bob_choice[:] = 1
        a, _, _ = sift(block)
        assert np.array_equal(a, block.alice_p[keep])

    def test_unmeasured_block_rejected(self, paper_models):
        mod, _, _ = paper_models
        block = modulate_block(BlockSpec(5_000, 500, 500, seed=1), mod)
        with pytest.raises(ModelError):
            sift(block)

    def test_test_pulse_pairs(self, paper_models):
        mod, ch, det = paper_models
        spec = BlockSpec(20_000, 2_000, 2_000, seed=9)
        block = transmit_measure(modulate_block(spec, mod), ch, det, seed=3)
        a, b = probe_pulse_pairs(block)
        assert len(a) == len(b) == spec.test_pulses
        # half the test pulses land on the modulated quadrature
        assert 0.3 < (a != 0).mean() < 0.7


class TestReplayFiles:
    def test_roundtrip(self, paper_models, tmp_path):
        mod, ch, det = paper_models
        spec = BlockSpec(10_000, 1_000, 1_000, seed=13)
        block = transmit_measure(modulate_block(spec, mod), ch, det, seed=14)
        path = tmp_path / "block.cvqb"
        write_block(block, path)
        loaded = read_block(path)
        assert loaded.block_id == block.block_id
        assert loaded.modulation_variance == block.modulation_variance
        assert np.array_equal(loaded.alice_x, block.alice_x)
        assert np.array_equal(loaded.alice_p, block.alice_p)
        assert np.array_equal(loaded.bob_outcome, block.bob_outcome)
        assert np.array_equal(loaded.bob_choice, block.bob_choice)
        assert np.array_equal(loaded.roles, block.roles)

    def test_header_magic(self, paper_models, tmp_path):
        mod, ch, det = paper_models
        spec = BlockSpec(2_000, 100, 100, seed=13)
        block = transmit_measure(modulate_block(spec, mod), ch, det, seed=1)
        path = tmp_path / "block.cvqb"
        write_block(block, path)
        with open(path, "rb") as fh:
            assert fh.read(4) == b"CVQB"
        # corrupt the magic
        data = bytearray(path.read_bytes())
        data[0] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(ModelError):
            read_block(path)

    def test_incomplete_block_rejected(self, paper_models, tmp_path):
        mod, _, _ = paper_models
        block = modulate_block(BlockSpec(2_000, 100, 100, seed=1), mod)
        with pytest.raises(ModelError):
            write_block(block, tmp_path / "x.cvqb")
