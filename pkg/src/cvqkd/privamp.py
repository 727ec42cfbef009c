"""Privacy amplification: composite NTT / Galois-field hashing.

Stage 1 packs the reconciled block into L_p = 2^14 elements of GF(p),
p = 33 832 961 (25 bits per element, little-endian), multiplies
component-wise with a zero-free random vector and takes the inverse number
theoretic transform; the result, re-serialized and truncated to
m = 19 937 bits, is an almost-universal hash (eps1 = 1 + k/p) that costs
two vectorized NTTs.  Stage 2 multiplies in GF(2^19937) (reduction
trinomial x^19937 + x^881 + 1) by a nonzero random element and truncates
to the final key length k -- a properly universal family (eps2 = 1) whose
cost is tolerable at the reduced input size.  The composite universality
is eps_c = 2^(k - 19937) eps1 + eps2.

The final key length is k = floor(n * dI_eff) - s for security parameter
s, minus any extra bits the session explicitly leaked (key-confirmation
digest).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ModelError, NoKeyAvailable

PRIME = 33_832_961
VECTOR_LEN = 1 << 14                 # L_p
BITS_PER_ELEMENT = 25                # 2^25 < p
INTERMEDIATE_BITS = 19_937           # m, a Mersenne exponent
REDUCTION_TAP = 881                  # x^19937 + x^881 + 1
MAX_INPUT_BITS = VECTOR_LEN * BITS_PER_ELEMENT


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in range(2, int(math.isqrt(n)) + 1):
        if n % q == 0:
            return False
    return True


def _find_root() -> int:
    """Primitive L_p-th root of unity in GF(p), derived from a generator."""
    # p - 1 = 2^14 * 5 * 7 * 59
    factors = (2, 5, 7, 59)
    for g in range(2, 100):
        if all(pow(g, (PRIME - 1) // q, PRIME) != 1 for q in factors):
            return pow(g, (PRIME - 1) // VECTOR_LEN, PRIME)
    raise ModelError("no generator found")


def verify_field_constants() -> None:
    """Fail fast if the published field constants do not hold."""
    if not _is_prime(PRIME):
        raise ModelError(f"{PRIME} is not prime")
    if (PRIME - 1) % VECTOR_LEN != 0:
        raise ModelError("NTT length does not divide p - 1")
    w = _find_root()
    if pow(w, VECTOR_LEN, PRIME) != 1 or pow(w, VECTOR_LEN // 2, PRIME) == 1:
        raise ModelError("NTT root has wrong order")


verify_field_constants()
_ROOT = _find_root()


def _twiddle_table(root: int) -> np.ndarray:
    w = np.empty(VECTOR_LEN, dtype=np.int64)
    w[0] = 1
    for i in range(1, VECTOR_LEN):
        w[i] = w[i - 1] * root % PRIME
    return w

_W_FWD = _twiddle_table(_ROOT)
_W_INV = _twiddle_table(pow(_ROOT, PRIME - 2, PRIME))
_LEN_INV = pow(VECTOR_LEN, PRIME - 2, PRIME)


def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev

_BITREV = _bit_reverse_permutation(VECTOR_LEN)


def _ntt(vec: np.ndarray, twiddles: np.ndarray) -> np.ndarray:
    """Iterative radix-2 transform; int64 is safe since p^2 < 2^63."""
    a = vec[_BITREV].astype(np.int64)
    size = 2
    while size <= VECTOR_LEN:
        half = size // 2
        step = VECTOR_LEN // size
        w = twiddles[::step][:half]
        a = a.reshape(-1, size)
        lo = a[:, :half]
        hi = a[:, half:] * w % PRIME
        a = np.concatenate([(lo + hi) % PRIME, (lo - hi) % PRIME], axis=1).reshape(-1)
        size *= 2
    return a


def _check_vector(vec) -> np.ndarray:
    v = np.asarray(vec)
    if v.shape != (VECTOR_LEN,):
        raise ModelError(f"vector must have length {VECTOR_LEN}")
    v = v.astype(np.int64)
    if v.min() < 0 or v.max() >= PRIME:
        raise ModelError("vector elements must lie in [0, p)")
    return v


def ntt_forward(vec) -> np.ndarray:
    return _ntt(_check_vector(vec), _W_FWD)


def ntt_inverse(vec) -> np.ndarray:
    return _ntt(_check_vector(vec), _W_INV) * _LEN_INV % PRIME


# ---------------------------------------------------------------------------
# bit packing
# ---------------------------------------------------------------------------

def bits_to_elements(bits: np.ndarray) -> np.ndarray:
    """Pack a bit array (25 bits per element, little-endian) into GF(p) elements."""
    if len(bits) > MAX_INPUT_BITS:
        raise ModelError(f"input exceeds {MAX_INPUT_BITS} bits")
    padded = np.zeros(MAX_INPUT_BITS, dtype=np.int64)
    padded[:len(bits)] = bits
    weights = (1 << np.arange(BITS_PER_ELEMENT, dtype=np.int64))
    return padded.reshape(VECTOR_LEN, BITS_PER_ELEMENT) @ weights


def elements_to_bits(elements: np.ndarray, nbits: int) -> np.ndarray:
    """Inverse of bits_to_elements, truncated to nbits."""
    e = np.asarray(elements, dtype=np.int64)
    bits = (e[:, None] >> np.arange(BITS_PER_ELEMENT)) & 1
    return bits.reshape(-1)[:nbits].astype(np.uint8)


# ---------------------------------------------------------------------------
# hash stages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HashSpec:
    input_bits: int
    output_bits: int
    security_bits: int
    prime: int = PRIME
    vector_len: int = VECTOR_LEN
    intermediate_bits: int = INTERMEDIATE_BITS

    def __post_init__(self):
        if self.input_bits > MAX_INPUT_BITS:
            raise ModelError("input too long for the stage-1 vector")
        if not 1 <= self.output_bits <= self.intermediate_bits:
            raise ModelError("output length must be in [1, m]")


@dataclass(frozen=True)
class HashSeed:
    """Trusted-randomness seeds: zero-free GF(p) vector, nonzero GF(2^m) element."""

    stage1: np.ndarray
    stage2: int

    def __post_init__(self):
        v = _check_vector(self.stage1)
        if (v == 0).any():
            raise ModelError("stage-1 seed must have no zero element")
        if self.stage2 == 0:
            raise ModelError("stage-2 seed must be nonzero")
        if self.stage2 >> INTERMEDIATE_BITS:
            raise ModelError("stage-2 seed exceeds the field degree")

    @classmethod
    def generate(cls, rng: np.random.Generator) -> "HashSeed":
        vec = rng.integers(1, PRIME, VECTOR_LEN, dtype=np.int64)
        nbytes = (INTERMEDIATE_BITS + 7) // 8
        while True:
            s2 = int.from_bytes(rng.bytes(nbytes), "little") & ((1 << INTERMEDIATE_BITS) - 1)
            if s2:
                return cls(stage1=vec, stage2=s2)


def hash_stage1(bits: np.ndarray, seed_vector: np.ndarray,
                out_bits: int = INTERMEDIATE_BITS) -> np.ndarray:
    """Inverse NTT of the component-wise product with the seed vector."""
    seed = _check_vector(seed_vector)
    if (seed == 0).any():
        raise ModelError("stage-1 seed must have no zero element")
    x = bits_to_elements(np.asarray(bits, dtype=np.uint8))
    y = ntt_inverse(x * seed % PRIME)
    return elements_to_bits(y, out_bits)


def _gf2m_mul(a: int, b: int) -> int:
    """Carry-less product in GF(2^19937), comb method with 8-bit windows."""
    table = [0] * 256
    for w in range(1, 256):
        lsb = w & -w
        table[w] = table[w ^ lsb] ^ (a << (lsb.bit_length() - 1))
    acc = 0
    for byte in reversed(b.to_bytes((INTERMEDIATE_BITS + 7) // 8, "little")):
        acc = (acc << 8) ^ table[byte]
    # reduce modulo x^19937 + x^881 + 1
    while acc.bit_length() > INTERMEDIATE_BITS:
        high = acc >> INTERMEDIATE_BITS
        acc = (acc & ((1 << INTERMEDIATE_BITS) - 1)) ^ high ^ (high << REDUCTION_TAP)
    return acc


def hash_stage2(bits: np.ndarray, seed_element: int, out_bits: int) -> np.ndarray:
    """Multiplication by the seed in GF(2^19937), truncated to out_bits."""
    if seed_element == 0:
        raise ModelError("stage-2 seed must be nonzero")
    if len(bits) > INTERMEDIATE_BITS:
        raise ModelError("stage-2 input exceeds the field degree")
    x = int.from_bytes(np.packbits(np.asarray(bits, dtype=np.uint8),
                                   bitorder="little").tobytes(), "little")
    y = _gf2m_mul(x, seed_element)
    out = np.zeros(out_bits, dtype=np.uint8)
    ybytes = np.frombuffer(y.to_bytes((INTERMEDIATE_BITS + 7) // 8, "little"),
                           dtype=np.uint8)
    allbits = np.unpackbits(ybytes, bitorder="little")
    out[:] = allbits[:out_bits]
    return out


# ---------------------------------------------------------------------------
# end-to-end amplification
# ---------------------------------------------------------------------------

def key_length(n_symbols: int, delta_i_eff: float, security_bits: int,
               extra_discard: int = 0) -> int:
    """k = floor(n dI_eff) - s - extra; the extra term covers explicit leaks."""
    return math.floor(n_symbols * delta_i_eff) - security_bits - extra_discard


def composite_universality(k: int):
    """(eps_c as float, exact Fraction of eps_c - 1).

    eps_c = 2^(k - m) eps1 + eps2 with eps1 = 1 + k/p and eps2 = 1; the
    excess over 1 underflows float64 for any practical k, so the exact
    rational value is returned alongside.
    """
    excess = Fraction(1, 2 ** (INTERMEDIATE_BITS - k)) * (1 + Fraction(k, PRIME))
    return 1.0 + float(excess), excess


@dataclass
class AmplificationReport:
    key_bits: int
    security_bits: int
    extra_discard: int
    epsilon_c: float
    log2_epsilon_excess: float


def privacy_amplify(block_bits: np.ndarray, delta_i_eff: float, n_symbols: int,
                    security_bits: int, seed: HashSeed,
                    extra_discard: int = 0):
    """Compress a reconciled block into the final key.

    Returns (key_bits_array, AmplificationReport); raises NoKeyAvailable
    when the budget k = floor(n dI_eff) - s - extra is not positive.
    """
    k = key_length(n_symbols, delta_i_eff, security_bits, extra_discard)
    if k < 1:
        raise NoKeyAvailable(f"key budget {k} <= 0 at dI_eff = {delta_i_eff:.5f}")
    if k > INTERMEDIATE_BITS:
        raise ModelError("key longer than the intermediate hash")
    inter = hash_stage1(block_bits, seed.stage1)
    key = hash_stage2(inter, seed.stage2, k)
    eps_c, excess = composite_universality(k)
    log2_excess = (k - INTERMEDIATE_BITS) + math.log2(1.0 + k / PRIME)
    return key, AmplificationReport(
        key_bits=k, security_bits=security_bits, extra_discard=extra_discard,
        epsilon_c=eps_c, log2_epsilon_excess=log2_excess)
