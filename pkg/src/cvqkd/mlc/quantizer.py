"""Scalar quantizer design and the Gaussian entropies that drive it.

Bob quantizes his homodyne outcomes into 16 equally spaced intervals
(symmetric about zero, the two outer ones unbounded) and labels each
interval with its 4-bit natural-binary index, LSB plane first.  The
interval width trades mutual information against the per-level conditional
entropies that the LDPC code rates must cover, so two design modes exist:

* maximize I(X; Q(Y)) outright (grid bracket + golden-section refine);
* pick the narrowest width that leaves every coded level a configured
  entropy margin below its disclosure budget 1 - R.  This is how a
  practical rate set is mapped onto an operating width.

All entropies are computed by Gauss-Hermite quadrature over the Gaussian
input; the marginal/conditional chain-rule identities hold to float
precision by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import golden
from scipy.special import ndtr

from ..errors import ModelError
from ..rates import ChannelModel, DetectorModel, Modulation

_GH_NODES = 129
_nodes, _weights = np.polynomial.hermite_e.hermegauss(_GH_NODES)
_weights = _weights / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class LikelihoodModel:
    """Gaussian channel seen by the reconciler: y = gain * x + N(0, noise_var).

    ``x`` is Alice's retained quadrature value, ``y`` Bob's outcome, both in
    shot-noise units.  ``input_var`` is Var(x) = V_A.
    """

    gain: float
    noise_var: float
    input_var: float

    def __post_init__(self):
        if self.noise_var <= 0.0 or self.input_var < 0.0 or self.gain < 0.0:
            raise ModelError("invalid likelihood model")

    @property
    def output_std(self) -> float:
        return math.sqrt(self.gain ** 2 * self.input_var + self.noise_var)

    @property
    def snr(self) -> float:
        return self.gain ** 2 * self.input_var / self.noise_var

    @property
    def mutual_info(self) -> float:
        """I(X;Y) of the unquantized channel, bits/symbol."""
        return 0.5 * math.log2(1.0 + self.snr)

    @classmethod
    def from_models(cls, mod: Modulation, ch: ChannelModel, det: DetectorModel):
        eta_t = det.efficiency * ch.transmission
        return cls(gain=math.sqrt(eta_t),
                   noise_var=1.0 + det.electronic_noise + eta_t * ch.excess_noise,
                   input_var=mod.variance)

    @classmethod
    def from_estimate(cls, t_hat: float, eps_hat: float, det: DetectorModel,
                      mod: Modulation):
        """Same, but from estimated channel parameters (eps floored at 0)."""
        eta_t = det.efficiency * t_hat
        if eta_t <= 0.0:
            raise ModelError("estimated transmission must be positive")
        return cls(gain=math.sqrt(eta_t),
                   noise_var=1.0 + det.electronic_noise + eta_t * max(eps_hat, 0.0),
                   input_var=mod.variance)


@dataclass(frozen=True)
class QuantizerConfig:
    """16 equally spaced intervals of ``interval_width``, natural-binary labels."""

    interval_width: float
    num_levels: int = 4
    mutual_info: float = field(default=0.0, compare=False)  # achieved I(X;Q(Y))

    def __post_init__(self):
        if self.interval_width <= 0.0:
            raise ModelError("interval width must be positive")
        if self.num_levels < 1:
            raise ModelError("need at least one level")

    @property
    def num_intervals(self) -> int:
        return 1 << self.num_levels

    @property
    def boundaries(self) -> np.ndarray:
        """The num_intervals - 1 finite bin edges, symmetric about 0."""
        half = self.num_intervals // 2
        return (np.arange(1, self.num_intervals) - half) * self.interval_width

    def quantize(self, y) -> np.ndarray:
        """Map outcomes to interval indices 0..num_intervals-1.

        A value exactly on a boundary goes to the lower interval (intervals
        are half-open (lo, hi]), so ties round toward -inf deterministically.
        """
        return np.searchsorted(self.boundaries, np.asarray(y), side="left").astype(np.int32)

    def labels_to_planes(self, labels: np.ndarray) -> list[np.ndarray]:
        return [((labels >> j) & 1).astype(np.uint8) for j in range(self.num_levels)]

    @staticmethod
    def planes_to_labels(planes) -> np.ndarray:
        labels = np.zeros(len(planes[0]), dtype=np.int32)
        for j, p in enumerate(planes):
            labels |= p.astype(np.int32) << j
        return labels


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------

def bin_probabilities(config: QuantizerConfig, means, sigma: float) -> np.ndarray:
    """P(Q(y) = v | y ~ N(mean_i, sigma^2)) as an (n, num_intervals) matrix."""
    means = np.atleast_1d(np.asarray(means, dtype=float))
    b = config.boundaries
    cdf = ndtr((b[None, :] - means[:, None]) / sigma)
    p = np.empty((means.size, config.num_intervals))
    p[:, 0] = cdf[:, 0]
    p[:, 1:-1] = np.diff(cdf, axis=1)
    p[:, -1] = 1.0 - cdf[:, -1]
    return p


def _plogp(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    nz = p > 0.0
    out[nz] = p[nz] * np.log2(p[nz])
    return out


def _conditional_bin_probs(config: QuantizerConfig, channel: LikelihoodModel):
    """Bin probabilities at the Gauss-Hermite nodes of the input Gaussian."""
    x = _nodes * math.sqrt(channel.input_var)
    return bin_probabilities(config, channel.gain * x, math.sqrt(channel.noise_var))


def quantizer_entropy(config: QuantizerConfig, channel: LikelihoodModel) -> float:
    """Marginal entropy H(Q(Y)) in bits."""
    p = bin_probabilities(config, 0.0, channel.output_std)
    return float(-_plogp(p).sum())


def conditional_entropy(config: QuantizerConfig, channel: LikelihoodModel) -> float:
    """H(Q(Y) | X) in bits, by Gauss-Hermite quadrature."""
    p = _conditional_bin_probs(config, channel)
    return float((_weights * (-_plogp(p).sum(axis=1))).sum())


def quantized_mutual_info(config: QuantizerConfig, channel: LikelihoodModel) -> float:
    """I(X; Q(Y)) = H(Q(Y)) - H(Q(Y)|X) in bits."""
    return quantizer_entropy(config, channel) - conditional_entropy(config, channel)


def _level_entropies(p: np.ndarray, wts: np.ndarray, num_levels: int) -> np.ndarray:
    """H(l_j | ., l_<j) for each bit plane j, from bin-probability rows.

    Natural-binary labels: plane j of interval v is bit j of v.  The chain
    rule sum over planes reproduces the entropy of the full index exactly.
    """
    v = np.arange(p.shape[1])
    out = np.empty(num_levels)
    for j in range(num_levels):
        bit = (v >> j) & 1
        h = np.zeros(p.shape[0])
        for prefix in range(1 << j):
            sel = (v & ((1 << j) - 1)) == prefix
            pu = p[:, sel].sum(axis=1)
            p1 = p[:, sel & (bit == 1)].sum(axis=1)
            p0 = pu - p1
            for q in (p0, p1):
                nz = (q > 0.0) & (pu > 0.0)
                h[nz] -= q[nz] * np.log2(q[nz] / pu[nz])
        out[j] = float((wts * h).sum())
    return out


def level_profiles(config: QuantizerConfig, channel: LikelihoodModel):
    """Per-level conditional entropies and ideal code rates.

    Returns (cond_entropies, ideal_rates, marginal_entropies) where
    cond_entropies[j] = H(l_j | X, l_<j), ideal_rates[j] = 1 - that, and
    marginal_entropies[j] = H(l_j | l_<j) (no side information).
    """
    p = _conditional_bin_probs(config, channel)
    cond = _level_entropies(p, _weights, config.num_levels)
    pm = bin_probabilities(config, 0.0, channel.output_std)
    marg = _level_entropies(pm, np.ones(1), config.num_levels)
    return cond, 1.0 - cond, marg


# ---------------------------------------------------------------------------
# design
# ---------------------------------------------------------------------------

def design_quantizer(channel: LikelihoodModel, num_levels: int = 4,
                     level_rates=None, margin: float = 0.031) -> QuantizerConfig:
    """Choose the interval width for a 2^num_levels-interval quantizer.

    Without ``level_rates`` the width maximizes I(X; Q(Y)): a coarse grid
    over [0.05, 2] * sigma_Y brackets the (unimodal) maximum, golden-section
    refines it; if the grid shows no interior bracket the best grid point is
    used directly.

    With ``level_rates`` (one code rate per level, 0 = plane disclosed) the
    width is the smallest one for which every coded level j keeps

        (1 - R_j) - H(l_j | X, l_<j)  >=  margin   [bits],

    i.e. the practical codes all retain at least ``margin`` bits of
    disclosure slack.  Narrower is better for efficiency, so the binding
    constraint sits exactly at the margin.
    """
    sigma_y = channel.output_std
    lo, hi = 0.05 * sigma_y, 2.0 * sigma_y

    if level_rates is None:
        widths = np.linspace(lo, hi, 64)
        vals = [quantized_mutual_info(QuantizerConfig(w, num_levels), channel)
                for w in widths]
        k = int(np.argmax(vals))
        if 0 < k < len(widths) - 1:
            w_opt = golden(
                lambda w: -quantized_mutual_info(QuantizerConfig(w, num_levels), channel),
                brack=(widths[k - 1], widths[k], widths[k + 1]))
        else:
            w_opt = widths[k]
        cfg = QuantizerConfig(float(w_opt), num_levels)
        return QuantizerConfig(float(w_opt), num_levels,
                               mutual_info=quantized_mutual_info(cfg, channel))

    if len(level_rates) != num_levels:
        raise ModelError("need one code rate per level")
    if not any(r > 0.0 for r in level_rates):
        raise ModelError("margin design needs at least one coded level")

    def min_slack(w: float) -> float:
        cond, _, _ = level_profiles(QuantizerConfig(w, num_levels), channel)
        return min((1.0 - r) - h for r, h in zip(level_rates, cond) if r > 0.0)

    widths = np.linspace(lo, hi, 128)
    feasible = [i for i, w in enumerate(widths) if min_slack(w) >= margin]
    if not feasible:
        raise ModelError(f"no width satisfies the {margin}-bit margin for rates {level_rates}")
    i0 = feasible[0]
    if i0 == 0:
        w_star = widths[0]
    else:
        a, b = widths[i0 - 1], widths[i0]
        for _ in range(60):
            mid = 0.5 * (a + b)
            if min_slack(mid) >= margin:
                b = mid
            else:
                a = mid
        w_star = b
    cfg = QuantizerConfig(float(w_star), num_levels)
    return QuantizerConfig(float(w_star), num_levels,
                           mutual_info=quantized_mutual_info(cfg, channel))


# ---------------------------------------------------------------------------
# decoder-facing likelihoods
# ---------------------------------------------------------------------------

def symbol_bin_likelihoods(config: QuantizerConfig, channel: LikelihoodModel,
                           x: np.ndarray) -> np.ndarray:
    """P(Q(y) = v | x_i) for every symbol i: the decoder's channel evidence."""
    return bin_probabilities(config, channel.gain * np.asarray(x, dtype=float),
                             math.sqrt(channel.noise_var))


def plane_prior_llrs(likelihoods: np.ndarray, level: int, num_levels: int,
                     hard_planes: dict, soft_planes: dict,
                     clip: float = 25.0) -> np.ndarray:
    """Per-symbol prior LLR log(P(bit=0)/P(bit=1)) for one bit plane.

    ``hard_planes`` maps plane index -> known bit array (disclosed or already
    decoded); ``soft_planes`` maps plane index -> P(bit=1) array (extrinsic
    beliefs from other levels' decoders).  The plane being decoded is skipped
    automatically.
    """
    v = np.arange(likelihoods.shape[1])
    w = likelihoods
    for jp, bits in hard_planes.items():
        if jp == level:
            continue
        w = w * (((v >> jp) & 1)[None, :] == bits[:, None])
    for jp, p1 in soft_planes.items():
        if jp == level:
            continue
        bitv = ((v >> jp) & 1)[None, :].astype(float)
        w = w * (bitv * p1[:, None] + (1.0 - bitv) * (1.0 - p1[:, None]))
    bit = ((v >> level) & 1).astype(bool)
    num = w[:, ~bit].sum(axis=1)
    den = w[:, bit].sum(axis=1)
    tiny = 1e-300
    return np.clip(np.log(num + tiny) - np.log(den + tiny), -clip, clip)
