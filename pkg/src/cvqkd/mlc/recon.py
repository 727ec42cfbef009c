"""Multilevel reverse reconciliation over the quantized bit planes.

Bob quantizes, splits the labels into bit planes, discloses the planes
whose ideal code rate is ~0 outright, and sends LDPC syndromes for the
rest plus a thin outer BCH parity over the undisclosed planes.  Alice
recovers Bob's planes by multistage soft decoding: each coded level's
prior mixes the Gaussian evidence from her own symbols with the disclosed
planes and the extrinsic beliefs of the other coded levels, and levels are
swept LSB to MSB several times, resuming the sum-product state of any
level that has not converged yet.  All classical information flows one
way, Bob to Alice; a failure is always *detected* (inner syndromes or
outer parity refuse to verify) and the block is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CvqkdError, ModelError
from . import _kernels
from .bch import OuterCode
from .ldpc import LdpcCode
from .quantizer import (
    LikelihoodModel,
    QuantizerConfig,
    plane_prior_llrs,
    quantizer_entropy,
    symbol_bin_likelihoods,
)

PRIOR_CLIP = 25.0


@dataclass(frozen=True)
class MultilevelSpec:
    """Per-level code rates (LSB first; 0 = disclose the plane) and sizes."""

    level_rates: tuple = (0.0, 0.0, 0.42, 0.95)
    block_length: int = 10_000
    outer_rate: float = 0.998
    inner_iterations: int = 200
    level_sweeps: int = 5

    def __post_init__(self):
        if any(not 0.0 <= r < 1.0 for r in self.level_rates):
            raise ModelError("level rates must lie in [0, 1)")
        if list(self.level_rates) != sorted(self.level_rates):
            raise ModelError("level rates must be non-decreasing, LSB first")

    @property
    def num_levels(self) -> int:
        return len(self.level_rates)

    @property
    def coded_levels(self) -> tuple:
        return tuple(j for j, r in enumerate(self.level_rates) if r > 0.0)

    @property
    def disclosed_levels(self) -> tuple:
        return tuple(j for j, r in enumerate(self.level_rates) if r == 0.0)

    @property
    def payload_bits(self) -> int:
        """Bits kept secret before privacy amplification: the coded planes."""
        return len(self.coded_levels) * self.block_length

    def outer_code(self) -> OuterCode:
        return OuterCode(self.payload_bits, self.outer_rate)


@dataclass
class SyndromeSet:
    """Everything Bob discloses for one frame, plus identifiers to match codes."""

    block_id: int
    interval_width: float
    level_rates: tuple
    disclosed_planes: dict        # level -> packed bits (np.uint8)
    level_syndromes: dict         # level -> packed syndrome bits (np.uint8)
    syndrome_lengths: dict        # level -> syndrome bit count
    outer_parity: np.ndarray      # packed bits
    outer_parity_len: int
    code_seeds: dict              # level -> construction seed

    def total_disclosed(self, n: int) -> int:
        """M_rec: every classical bit this frame reveals to the channel."""
        plane_bits = len(self.disclosed_planes) * n
        synd_bits = sum(self.syndrome_lengths.values())
        return plane_bits + synd_bits + self.outer_parity_len


def _pack(bits: np.ndarray) -> np.ndarray:
    return np.packbits(bits.astype(np.uint8), bitorder="little")


def _unpack(packed: np.ndarray, nbits: int) -> np.ndarray:
    return np.unpackbits(packed, count=nbits, bitorder="little")


def encode_syndromes(labels: np.ndarray, spec: MultilevelSpec,
                     codes: dict, quantizer: QuantizerConfig,
                     block_id: int = 0,
                     outer: OuterCode | None = None) -> SyndromeSet:
    """Bob's side: disclose rate-0 planes, emit syndromes for coded planes.

    ``codes`` maps coded level index -> LdpcCode of length block_length.
    """
    n = spec.block_length
    if len(labels) != n:
        raise ModelError(f"expected {n} labels, got {len(labels)}")
    planes = quantizer.labels_to_planes(labels)
    disclosed = {}
    syndromes = {}
    synd_len = {}
    seeds = {}
    for j in spec.disclosed_levels:
        disclosed[j] = _pack(planes[j])
    for j in spec.coded_levels:
        code = codes[j]
        if code.n != n:
            raise ModelError(f"code length {code.n} != block length {n}")
        s = code.syndrome(planes[j])
        syndromes[j] = _pack(s)
        synd_len[j] = code.m
        seeds[j] = code.seed
    if outer is None:
        outer = spec.outer_code()
    payload = np.concatenate([planes[j] for j in spec.coded_levels])
    parity = outer.encode(payload)
    return SyndromeSet(
        block_id=block_id,
        interval_width=quantizer.interval_width,
        level_rates=spec.level_rates,
        disclosed_planes=disclosed,
        level_syndromes=syndromes,
        syndrome_lengths=synd_len,
        outer_parity=_pack(parity),
        outer_parity_len=len(parity),
        code_seeds=seeds,
    )


@dataclass
class DecodeResult:
    ok: bool
    labels: np.ndarray | None
    iterations: dict = field(default_factory=dict)   # level -> total iterations
    sweeps_used: int = 0
    outer_corrected: int = 0
    failure_reason: str = ""


def decode_multilevel(alice_values: np.ndarray, synd: SyndromeSet,
                      spec: MultilevelSpec, codes: dict,
                      channel: LikelihoodModel,
                      outer: OuterCode | None = None) -> DecodeResult:
    """Alice's side: recover Bob's labels from her symbols and the syndromes.

    Multistage decoding with soft inter-level iteration: coded levels are
    attempted LSB to MSB; a level that fails keeps its sum-product state and
    resumes on the next sweep with priors refreshed from the other levels'
    current beliefs.  Never returns silently wrong data: the inner syndromes
    and the outer parity must both verify, with the outer code allowed to
    repair residual errors up to its design strength.
    """
    n = spec.block_length
    if len(alice_values) != n:
        raise ModelError(f"expected {n} symbols, got {len(alice_values)}")
    quantizer = QuantizerConfig(synd.interval_width, spec.num_levels)
    lik = symbol_bin_likelihoods(quantizer, channel, alice_values)

    hard_planes = {j: _unpack(synd.disclosed_planes[j], n)
                   for j in spec.disclosed_levels}
    level_synd = {j: _unpack(synd.level_syndromes[j], synd.syndrome_lengths[j])
                  for j in spec.coded_levels}

    # per-level sum-product state
    post = {}
    rmsg = {j: np.zeros(codes[j].num_edges) for j in spec.coded_levels}
    prior = {}
    soft = {}
    converged = {j: False for j in spec.coded_levels}
    iters = {j: 0 for j in spec.coded_levels}
    decoded_bits = {}

    sweeps_used = 0
    for sweep in range(spec.level_sweeps):
        sweeps_used = sweep + 1
        for j in spec.coded_levels:
            if converged[j]:
                continue
            known = dict(hard_planes)
            for jj in spec.coded_levels:
                if jj != j and converged[jj]:
                    known[jj] = decoded_bits[jj]
            new_prior = plane_prior_llrs(lik, j, spec.num_levels, known,
                                         {jj: p for jj, p in soft.items() if jj != j},
                                         clip=PRIOR_CLIP)
            if j in post:
                # refresh priors in the resumed state: posterior keeps the
                # accumulated check messages, only the intrinsic part moves
                post[j] += new_prior - prior[j]
            else:
                post[j] = new_prior.copy()
            prior[j] = new_prior
            code = codes[j]
            bits, it, ok = _kernels.bp_decode(
                code.chk_ptr, code.chk_vars, level_synd[j], post[j], rmsg[j],
                spec.inner_iterations, code.max_check_degree,
                _kernels.CORRECTION_TABLE)
            iters[j] += it
            if ok:
                converged[j] = True
                decoded_bits[j] = bits
                soft.pop(j, None)
            else:
                # extrinsic belief P(bit=1) for the other levels
                ext = np.clip(post[j] - prior[j], -30.0, 30.0)
                soft[j] = 1.0 / (1.0 + np.exp(ext))
        if all(converged.values()):
            break

    if not all(converged.values()):
        bad = [j for j, c in converged.items() if not c]
        return DecodeResult(False, None, iters, sweeps_used,
                            failure_reason=f"inner syndromes unresolved at levels {bad}")

    payload = np.concatenate([decoded_bits[j] for j in spec.coded_levels])
    if outer is None:
        outer = spec.outer_code()
    parity = _unpack(synd.outer_parity, synd.outer_parity_len)
    corrected = 0
    if not outer.check(payload, parity):
        try:
            fixed = outer.correct(payload, parity)
        except CvqkdError as exc:
            return DecodeResult(False, None, iters, sweeps_used,
                                failure_reason=f"outer parity mismatch: {exc}")
        corrected = int((fixed != payload).sum())
        # corrections must not break the inner syndromes
        for idx, j in enumerate(spec.coded_levels):
            plane = fixed[idx * n:(idx + 1) * n]
            if not np.array_equal(codes[j].syndrome(plane), level_synd[j]):
                return DecodeResult(False, None, iters, sweeps_used,
                                    failure_reason="outer correction broke inner syndrome")
            decoded_bits[j] = plane

    planes = [None] * spec.num_levels
    for j in spec.disclosed_levels:
        planes[j] = hard_planes[j]
    for j in spec.coded_levels:
        planes[j] = decoded_bits[j]
    labels = QuantizerConfig.planes_to_labels(planes)
    return DecodeResult(True, labels, iters, sweeps_used, outer_corrected=corrected)


def reconciled_payload(labels: np.ndarray, spec: MultilevelSpec,
                       quantizer: QuantizerConfig) -> np.ndarray:
    """The bits both sides keep for privacy amplification: the coded planes."""
    planes = quantizer.labels_to_planes(labels)
    return np.concatenate([planes[j] for j in spec.coded_levels])


def efficiency_beta(spec: MultilevelSpec, quantizer: QuantizerConfig,
                    channel: LikelihoodModel, include_outer: bool = False) -> float:
    """Reconciliation efficiency beta = (H(Q(Y)) - M_rec/n) / I(X;Y).

    M_rec counts one full plane per rate-0 level and n(1-R) syndrome bits
    per coded level; ``include_outer`` adds the outer-code parity (the
    conventional efficiency figure leaves it out, the key-length accounting
    puts it back in).  Values outside the achievable range raise.
    """
    n = spec.block_length
    h_q = quantizer_entropy(quantizer, channel)
    m_rec = 0.0
    for r in spec.level_rates:
        m_rec += n if r == 0.0 else round(n * (1.0 - r))
    if include_outer:
        m_rec += spec.outer_code().parity_bits
    i_xy = channel.mutual_info
    beta = (h_q - m_rec / n) / i_xy
    if beta <= 0.0:
        raise ModelError(f"rate set discloses everything: beta = {beta:.4f}")
    if beta > quantized_upper_bound(quantizer, channel):
        raise ModelError("beta exceeds the quantized-information bound")
    return beta


def quantized_upper_bound(quantizer: QuantizerConfig, channel: LikelihoodModel) -> float:
    """beta can never exceed I(X;Q(Y))/I(X;Y)."""
    from .quantizer import quantized_mutual_info
    return quantized_mutual_info(quantizer, channel) / channel.mutual_info
