import numpy as np
import pytest

from cvqkd.errors import CodeConstructionError
from cvqkd.mlc.ldpc import DEGREE_TABLES, audit_code, build_ldpc, load_code, save_code


def _has_4_cycle_bruteforce(code):
    """Exhaustive search: two checks sharing two variables form a 4-cycle."""
    var_sets = [frozenset(code.chk_vars[code.chk_ptr[c]:code.chk_ptr[c + 1]])
                for c in range(code.m)]
    var_to_checks = {}
    for c, vs in enumerate(var_sets):
        for v in vs:
            var_to_checks.setdefault(v, []).append(c)
    for checks in var_to_checks.values():
        for i, c1 in enumerate(checks):
            for c2 in checks[i + 1:]:
                if len(var_sets[c1] & var_sets[c2]) > 1:
                    return True
    return False


class TestConstruction:
    def test_check_count(self):
        code = build_ldpc(10_000, 0.42, 1)
        assert code.m == 5_800
        assert code.n == 10_000

    def test_small_check_count(self):
        assert build_ldpc(1_000, 0.5, 2, profile={3: 1.0}).m == 500

    def test_deterministic(self):
        c1 = build_ldpc(1_000, 0.5, 7, profile={3: 1.0})
        c2 = build_ldpc(1_000, 0.5, 7, profile={3: 1.0})
        assert np.array_equal(c1.chk_ptr, c2.chk_ptr)
        assert np.array_equal(c1.chk_vars, c2.chk_vars)

    def test_seed_changes_graph(self):
        c1 = build_ldpc(1_000, 0.5, 7, profile={3: 1.0})
        c2 = build_ldpc(1_000, 0.5, 8, profile={3: 1.0})
        assert not np.array_equal(c1.chk_vars, c2.chk_vars)

    def test_no_4_cycles_bruteforce(self):
        code = build_ldpc(10_000, 0.42, 3)
        assert not _has_4_cycle_bruteforce(code)

    def test_high_rate_no_4_cycles(self):
        code = build_ldpc(10_000, 0.95, 4)
        assert not _has_4_cycle_bruteforce(code)
        assert code.m == 500

    def test_degree_profile_realized(self):
        code = build_ldpc(10_000, 0.42, 5)
        var_deg = np.bincount(code.chk_vars, minlength=code.n)
        realized = {int(d): int(c) for d, c in
                    zip(*np.unique(var_deg, return_counts=True))}
        for d, frac in DEGREE_TABLES[0.42].items():
            assert realized[d] == pytest.approx(frac * code.n, abs=1.0)

    def test_audit_passes(self):
        report = audit_code(build_ldpc(2_000, 0.5, 6, profile={3: 1.0}))
        assert report["ok"], report["problems"]
        assert report["min_var_degree"] >= 2 or report["min_var_degree"] == 3

    def test_unknown_rate_needs_profile(self):
        with pytest.raises(CodeConstructionError):
            build_ldpc(2_000, 0.37, 1)
        code = build_ldpc(2_000, 0.37, 1, profile={3: 1.0})
        assert code.m == round(2_000 * 0.63)

    def test_tiny_blocks_rejected(self):
        with pytest.raises(CodeConstructionError):
            build_ldpc(100, 0.5, 1)


class TestSyndrome:
    def test_linearity(self, desk_codes, rng):
        code = desk_codes[2]
        x = rng.integers(0, 2, code.n).astype(np.uint8)
        y = rng.integers(0, 2, code.n).astype(np.uint8)
        assert np.array_equal(code.syndrome(x ^ y),
                              code.syndrome(x) ^ code.syndrome(y))

    def test_all_zero(self, desk_codes):
        code = desk_codes[2]
        assert not code.syndrome(np.zeros(code.n, dtype=np.uint8)).any()

    def test_single_flip_touches_adjacent_checks(self, desk_codes, rng):
        code = desk_codes[2]
        x = rng.integers(0, 2, code.n).astype(np.uint8)
        s0 = code.syndrome(x)
        v = int(rng.integers(0, code.n))
        x[v] ^= 1
        changed = np.nonzero(code.syndrome(x) ^ s0)[0]
        expected = [c for c in range(code.m)
                    if v in code.chk_vars[code.chk_ptr[c]:code.chk_ptr[c + 1]]]
        assert sorted(changed.tolist()) == expected


class TestCodeFiles:
    def test_roundtrip_and_determinism(self, tmp_path):
        code = build_ldpc(2_000, 0.42, 11)
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        save_code(code, p1)
        save_code(build_ldpc(2_000, 0.42, 11), p2)
        assert p1.read_bytes() == p2.read_bytes()  # byte-identical rebuild
        loaded = load_code(p1)
        assert loaded.n == code.n and loaded.m == code.m
        assert np.array_equal(loaded.chk_vars, code.chk_vars)
        assert loaded.rate == code.rate and loaded.seed == code.seed

    def test_header_format(self, tmp_path):
        code = build_ldpc(2_000, 0.42, 11)
        path = tmp_path / "c.txt"
        save_code(code, path)
        header = path.read_text().splitlines()[0].split()
        assert header == ["2000", str(code.m), "0.42", "11"]

    def test_audit_catches_duplicated_edge(self, tmp_path):
        code = build_ldpc(2_000, 0.5, 12, profile={3: 1.0})
        path = tmp_path / "d.txt"
        save_code(code, path)
        lines = path.read_text().splitlines()
        row = lines[1].split()
        row[1] = row[0]  # duplicate the first index
        lines[1] = " ".join(row)
        path.write_text("\n".join(lines) + "\n")
        report = audit_code(load_code(path))
        assert not report["ok"]
