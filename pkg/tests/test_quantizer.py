import numpy as np
import pytest

from cvqkd.errors import ModelError
from cvqkd.mlc.quantizer import (
    LikelihoodModel,
    QuantizerConfig,
    bin_probabilities,
    conditional_entropy,
    design_quantizer,
    level_profiles,
    plane_prior_llrs,
    quantized_mutual_info,
    quantizer_entropy,
    symbol_bin_likelihoods,
)


def _mc_entropies(config, channel, n=2_000_000, seed=17):
    """Monte-Carlo oracle for H(Q(Y)) and the per-level conditional entropies."""
    rng = np.random.default_rng(seed)
    x = rng.normal(0, np.sqrt(channel.input_var), n)
    y = channel.gain * x + rng.normal(0, np.sqrt(channel.noise_var), n)
    labels = config.quantize(y)
    p = np.bincount(labels, minlength=config.num_intervals) / n
    h_q = -np.sum(p[p > 0] * np.log2(p[p > 0]))
    return h_q


class TestQuantizerConfig:
    def test_geometry(self):
        q = QuantizerConfig(0.5, 4)
        b = q.boundaries
        assert len(b) == 15
        assert np.allclose(b, -b[::-1])         # symmetric about zero
        assert np.allclose(np.diff(b), 0.5)     # equally spaced

    def test_tie_breaks_toward_lower_interval(self):
        q = QuantizerConfig(1.0, 4)
        # value exactly on a boundary belongs to the interval below it
        assert q.quantize([0.0])[0] == 7
        assert q.quantize([1.0])[0] == 8
        assert q.quantize([-7.0])[0] == 0
        assert q.quantize([7.0])[0] == 14
        assert q.quantize([7.0 + 1e-12])[0] == 15

    def test_plane_roundtrip(self):
        labels = np.arange(16, dtype=np.int32)
        q = QuantizerConfig(1.0, 4)
        planes = q.labels_to_planes(labels)
        assert np.array_equal(QuantizerConfig.planes_to_labels(planes), labels)

    def test_bin_probabilities_sum_to_one(self, paper_channel):
        q = QuantizerConfig(0.7, 4)
        p = bin_probabilities(q, np.linspace(-5, 5, 11), 1.3)
        assert np.allclose(p.sum(axis=1), 1.0)
        assert (p >= 0).all()

    def test_symmetric_bin_probabilities(self, paper_channel):
        # marginal distribution of Q(Y) symmetric under sign flip, exactly
        q = QuantizerConfig(0.7, 4)
        p = bin_probabilities(q, 0.0, paper_channel.output_std)[0]
        assert np.allclose(p, p[::-1], atol=1e-15)


class TestEntropies:
    def test_marginal_entropy_against_monte_carlo(self, paper_channel):
        q = QuantizerConfig(0.7255, 4)
        h = quantizer_entropy(q, paper_channel)
        h_mc = _mc_entropies(q, paper_channel)
        assert h == pytest.approx(h_mc, abs=3e-3)

    def test_chain_rule_conditional(self, paper_channel, paper_quantizer):
        cond, _, _ = level_profiles(paper_quantizer, paper_channel)
        assert cond.sum() == pytest.approx(
            conditional_entropy(paper_quantizer, paper_channel), abs=1e-9)

    def test_chain_rule_marginal(self, paper_channel, paper_quantizer):
        _, _, marg = level_profiles(paper_quantizer, paper_channel)
        assert marg.sum() == pytest.approx(
            quantizer_entropy(paper_quantizer, paper_channel), abs=1e-9)

    def test_quantization_loses_information(self, paper_channel):
        q = design_quantizer(paper_channel)
        assert quantized_mutual_info(q, paper_channel) < paper_channel.mutual_info


class TestDesign:
    def test_information_maximizing_mode(self, paper_channel):
        q = design_quantizer(paper_channel)
        i_opt = quantized_mutual_info(q, paper_channel)
        assert q.mutual_info == pytest.approx(i_opt, abs=1e-12)
        # the paper's achieved figure sits within tolerance of the optimum
        assert i_opt == pytest.approx(1.019, abs=5e-3)
        # nearby widths do not beat the optimum
        for w in (0.95 * q.interval_width, 1.05 * q.interval_width):
            assert quantized_mutual_info(QuantizerConfig(w, 4), paper_channel) <= i_opt + 1e-9

    def test_quantizer_ceiling_at_high_snr(self):
        ch = LikelihoodModel(gain=1.0, noise_var=1e-6, input_var=400.0)
        q = design_quantizer(ch)
        i = quantized_mutual_info(q, ch)
        assert i <= 4.0
        assert i > 3.3   # high SNR approaches the 4-bit ceiling

    def test_margin_mode_reproduces_operating_point(self, paper_channel, paper_quantizer):
        cond, ideal, _ = level_profiles(paper_quantizer, paper_channel)
        assert np.allclose(ideal, [0.002, 0.013, 0.456, 0.981], atol=0.01)
        assert quantized_mutual_info(paper_quantizer, paper_channel) == pytest.approx(
            1.019, abs=5e-3)
        # every coded level keeps at least the design margin
        for rate, h in zip((0, 0, 0.42, 0.95), cond):
            if rate > 0:
                assert (1 - rate) - h >= 0.031 - 1e-9

    def test_margin_mode_binding(self, paper_channel):
        # the binding level sits exactly at the margin
        q = design_quantizer(paper_channel, level_rates=(0, 0, 0.42, 0.95),
                             margin=0.031)
        cond, _, _ = level_profiles(q, paper_channel)
        slacks = [(1 - r) - h for r, h in zip((0, 0, 0.42, 0.95), cond) if r > 0]
        assert min(slacks) == pytest.approx(0.031, abs=1e-6)

    def test_margin_mode_validation(self, paper_channel):
        with pytest.raises(ModelError):
            design_quantizer(paper_channel, level_rates=(0, 0, 0, 0))
        with pytest.raises(ModelError):
            design_quantizer(paper_channel, level_rates=(0, 0.42), margin=0.031)

    def test_zero_snr_level_rates(self):
        # with a useless X the conditional profile degenerates to the
        # marginal one: side information contributes nothing, so the LSB
        # plane needs full disclosure
        ch = LikelihoodModel(gain=1e-6, noise_var=1.0, input_var=1.0)
        q = QuantizerConfig(0.35, 4)
        cond, ideal, marg = level_profiles(q, ch)
        assert np.allclose(cond, marg, atol=1e-9)
        assert ideal[0] == pytest.approx(0.0, abs=1e-9)


class TestPriors:
    def test_likelihoods_are_calibrated(self, paper_channel, desk_quantizer):
        rng = np.random.default_rng(3)
        n = 200_000
        x = rng.normal(0, np.sqrt(paper_channel.input_var), n)
        y = paper_channel.gain * x + rng.normal(0, np.sqrt(paper_channel.noise_var), n)
        labels = desk_quantizer.quantize(y)
        lik = symbol_bin_likelihoods(desk_quantizer, paper_channel, x)
        planes = desk_quantizer.labels_to_planes(labels)
        llr = plane_prior_llrs(lik, 2, 4, {0: planes[0], 1: planes[1]}, {})
        pred_p1 = 1.0 / (1.0 + np.exp(llr))
        # bin the predictions and compare with the realized bit frequency
        qs = np.quantile(llr, np.linspace(0, 1, 9))
        for lo, hi in zip(qs, qs[1:]):
            sel = (llr >= lo) & (llr <= hi)
            if sel.sum() < 1_000:
                continue
            assert pred_p1[sel].mean() == pytest.approx(planes[2][sel].mean(), abs=0.02)

    def test_known_plane_collapses_prior(self, paper_channel, desk_quantizer):
        rng = np.random.default_rng(4)
        x = rng.normal(0, np.sqrt(paper_channel.input_var), 1_000)
        lik = symbol_bin_likelihoods(desk_quantizer, paper_channel, x)
        labels = desk_quantizer.quantize(paper_channel.gain * x)
        planes = desk_quantizer.labels_to_planes(labels)
        known = {j: planes[j] for j in (0, 1, 3)}
        llr = plane_prior_llrs(lik, 2, 4, known, {})
        hard = (llr < 0).astype(np.uint8)
        # with three planes revealed and no noise in x->bin mapping the
        # remaining plane is mostly determined
        assert (hard == planes[2]).mean() > 0.95
