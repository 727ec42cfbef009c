import numpy as np
import pytest

from cvqkd.errors import DecodeFailure, ModelError
from cvqkd.mlc.bch import GF_EXP, GF_LOG, GF_ORDER, OuterCode


def test_field_tables_are_a_full_cycle():
    # the primitive element must generate all 65535 nonzero elements
    assert len(np.unique(GF_EXP[:GF_ORDER])) == GF_ORDER
    assert GF_EXP[0] == 1
    assert GF_LOG[1] == 0


class TestSizing:
    def test_desk_payload(self):
        oc = OuterCode(20_000, 0.998)
        assert oc.chunks == 1
        assert oc.t == 2
        assert oc.parity_bits == 32
        assert oc.rate >= 0.998

    def test_full_scale_payload(self):
        oc = OuterCode(400_000, 0.998)
        assert oc.chunks == 8
        assert oc.t == 6
        assert oc.parity_bits <= 800      # the budget ceil(0.002 * 400000)
        assert oc.rate >= 0.998

    def test_empty_payload_rejected(self):
        with pytest.raises(ModelError):
            OuterCode(0)


class TestEncodeDecode:
    @pytest.fixture(scope="class")
    def oc(self):
        return OuterCode(20_000, 0.998)

    @pytest.fixture(scope="class")
    def payload(self, oc):
        return np.random.default_rng(1).integers(0, 2, oc.payload_bits).astype(np.uint8)

    def test_clean_check(self, oc, payload):
        parity = oc.encode(payload)
        assert len(parity) == oc.parity_bits
        assert oc.check(payload, parity)
        assert np.array_equal(oc.correct(payload, parity), payload)

    def test_corrects_up_to_strength(self, oc, payload):
        parity = oc.encode(payload)
        rng = np.random.default_rng(2)
        for weight in (1, 2):
            for _ in range(10):
                bad = payload.copy()
                bad[rng.choice(oc.payload_bits, weight, replace=False)] ^= 1
                assert np.array_equal(oc.correct(bad, parity), payload)

    def test_detects_beyond_strength(self, oc, payload):
        parity = oc.encode(payload)
        rng = np.random.default_rng(3)
        detected = 0
        trials = 10
        for _ in range(trials):
            bad = payload.copy()
            bad[rng.choice(oc.payload_bits, 3, replace=False)] ^= 1
            try:
                fixed = oc.correct(bad, parity)
                # a rare miscorrection is possible for t+1 errors, but the
                # result must then still differ from a silent pass-through
                assert not np.array_equal(fixed, bad)
            except DecodeFailure:
                detected += 1
        assert detected >= trials - 2

    def test_heavy_pattern_never_validates(self, oc, payload):
        parity = oc.encode(payload)
        rng = np.random.default_rng(4)
        bad = payload.copy()
        bad[rng.choice(oc.payload_bits, 200, replace=False)] ^= 1
        assert not oc.check(bad, parity)

    def test_linearity(self, oc):
        rng = np.random.default_rng(5)
        x = rng.integers(0, 2, oc.payload_bits).astype(np.uint8)
        y = rng.integers(0, 2, oc.payload_bits).astype(np.uint8)
        assert np.array_equal(oc.encode(x ^ y), oc.encode(x) ^ oc.encode(y))

    def test_chunked_correction(self):
        oc = OuterCode(120_000, 0.998)
        assert oc.chunks == 3
        rng = np.random.default_rng(6)
        payload = rng.integers(0, 2, 120_000).astype(np.uint8)
        parity = oc.encode(payload)
        bad = payload.copy()
        # up to t errors in each chunk independently
        for k in range(oc.chunks):
            lo = k * 40_000
            bad[lo + rng.integers(0, 40_000, oc.t)] ^= 1
        assert np.array_equal(oc.correct(bad, parity), payload)
