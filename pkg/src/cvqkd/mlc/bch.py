"""Outer algebraic code: shortened binary BCH over GF(2^16).

The reconciled payload (the undisclosed bit planes, concatenated) gets a
thin layer of algebraic parity on top of the LDPC stage: it corrects the
handful of residual errors sum-product occasionally leaves behind and,
just as importantly, turns any heavier residue into a *detected* failure.

The parent code has length 2^16 - 1 = 65535; payloads longer than one
codeword are split into equal chunks, each shortened independently.  The
correction strength t is budgeted from the target outer rate: with the
0.998 rate used here a 400 000-bit payload affords 8 chunks of t = 6
(768 parity bits), a 20 000-bit desk payload one chunk of t = 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..errors import DecodeFailure, ModelError

GF_M = 16
GF_ORDER = (1 << GF_M) - 1           # 65535
PRIMITIVE_POLY = 0x1100B             # x^16 + x^12 + x^3 + x + 1
MAX_CHUNK_DATA = 50000               # keeps chunk + parity under the parent length


def _build_tables():
    exp = np.zeros(2 * GF_ORDER, dtype=np.int32)
    log = np.zeros(GF_ORDER + 1, dtype=np.int32)
    x = 1
    for i in range(GF_ORDER):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & (1 << GF_M):
            x ^= PRIMITIVE_POLY
    if x != 1:
        raise ModelError("primitive polynomial does not generate the field")
    exp[GF_ORDER:] = exp[:GF_ORDER]
    return exp, log


GF_EXP, GF_LOG = _build_tables()


def _minimal_poly(exponent: int) -> int:
    """Minimal polynomial of alpha^exponent as a GF(2) bitmask, LSB = x^0."""
    # conjugacy class {e, 2e, 4e, ...} mod GF_ORDER
    cls = []
    e = exponent % GF_ORDER
    while e not in cls:
        cls.append(e)
        e = (2 * e) % GF_ORDER
    # product of (x - alpha^c): coefficients in GF(2^16), must land in GF(2)
    poly = [1]
    for c in cls:
        root = GF_EXP[c]
        nxt = [0] * (len(poly) + 1)
        for i, coef in enumerate(poly):
            nxt[i + 1] ^= coef
            if coef and root:
                nxt[i] ^= GF_EXP[(GF_LOG[coef] + GF_LOG[root]) % GF_ORDER]
        poly = nxt
    mask = 0
    for i, coef in enumerate(poly):
        if coef not in (0, 1):
            raise ModelError("minimal polynomial has non-binary coefficient")
        mask |= coef << i
    return mask


def _poly_mul_gf2(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _poly_mod_gf2(a: int, b: int) -> int:
    db = b.bit_length()
    while a.bit_length() >= db:
        a ^= b << (a.bit_length() - db)
    return a


def _conjugacy_class(exponent: int) -> frozenset:
    cls = set()
    e = exponent % GF_ORDER
    while e not in cls:
        cls.add(e)
        e = (2 * e) % GF_ORDER
    return frozenset(cls)


def _generator_poly(t: int) -> int:
    """g(x) = lcm of minimal polynomials of alpha^1 .. alpha^2t.

    Distinct conjugacy classes have coprime minimal polynomials, so the lcm
    is the product over distinct classes (even exponents fold into odd ones).
    """
    g = 1
    seen = set()
    for i in range(1, 2 * t + 1):
        cls = _conjugacy_class(i)
        if cls in seen:
            continue
        seen.add(cls)
        g = _poly_mul_gf2(g, _minimal_poly(i))
    return g


@njit(cache=True)
def _lfsr_parity(bits, gen_taps, deg):
    """Systematic BCH encoding: remainder of data(x) * x^deg mod g(x)."""
    reg = np.zeros(deg, dtype=np.uint8)
    for i in range(len(bits)):
        fb = bits[i] ^ reg[deg - 1]
        for j in range(deg - 1, 0, -1):
            reg[j] = reg[j - 1] ^ (gen_taps[j] & fb)
        reg[0] = gen_taps[0] & fb
    out = np.empty(deg, dtype=np.uint8)
    for j in range(deg):
        out[j] = reg[deg - 1 - j]
    return out


@njit(cache=True)
def _syndromes(positions, num_synd, gf_exp):
    """S_i = sum over set-bit exponents of alpha^(i * pos), i = 1..num_synd."""
    out = np.zeros(num_synd, dtype=np.int64)
    for k in range(len(positions)):
        p = positions[k]
        for i in range(num_synd):
            out[i] ^= gf_exp[((i + 1) * p) % GF_ORDER]
    return out


def _gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(GF_EXP[(GF_LOG[a] + GF_LOG[b]) % GF_ORDER])


def _gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("GF inverse of 0")
    return int(GF_EXP[GF_ORDER - GF_LOG[a]])


def _berlekamp_massey(synd: list[int], t: int) -> list[int]:
    """Error-locator polynomial sigma(x), coefficients low order first."""
    c = [1] + [0] * (2 * t)
    b = [1] + [0] * (2 * t)
    l, mth, bb = 0, 1, 1
    for n in range(2 * t):
        d = synd[n]
        for i in range(1, l + 1):
            d ^= _gf_mul(c[i], synd[n - i])
        if d == 0:
            mth += 1
        elif 2 * l <= n:
            tmp = c[:]
            coef = _gf_mul(d, _gf_inv(bb))
            for i in range(mth, 2 * t + 1):
                c[i] ^= _gf_mul(coef, b[i - mth])
            l, b, bb, mth = n + 1 - l, tmp, d, 1
        else:
            coef = _gf_mul(d, _gf_inv(bb))
            for i in range(mth, 2 * t + 1):
                c[i] ^= _gf_mul(coef, b[i - mth])
            mth += 1
    return c[:l + 1]


def _chien_search(sigma: list[int], chunk_len: int) -> list[int] | None:
    """Roots of sigma as error positions within [0, chunk_len); None if defective."""
    degree = len(sigma) - 1
    if degree == 0:
        return []
    positions = []
    for pos in range(chunk_len):
        # candidate root: X = alpha^{-pos}
        acc = 0
        for i, coef in enumerate(sigma):
            if coef:
                acc ^= GF_EXP[(GF_LOG[coef] + i * (GF_ORDER - pos)) % GF_ORDER]
        if acc == 0:
            positions.append(pos)
    if len(positions) != degree:
        return None
    return positions


@dataclass
class OuterCode:
    """Shortened BCH wrapper sized for a fixed payload length and rate target."""

    payload_bits: int
    rate_target: float = 0.998
    t: int = field(init=False)
    chunks: int = field(init=False)
    parity_bits: int = field(init=False)

    def __post_init__(self):
        if self.payload_bits < 1:
            raise ModelError("payload must be non-empty")
        budget = math.ceil((1.0 - self.rate_target) * self.payload_bits)
        self.chunks = math.ceil(self.payload_bits / MAX_CHUNK_DATA)
        self.t = max(1, budget // (GF_M * self.chunks))
        self.parity_bits = self.chunks * GF_M * self.t
        gen = _generator_poly(self.t)
        deg = gen.bit_length() - 1
        if deg != GF_M * self.t:
            # conjugacy overlaps can shorten g; track the true degree
            self.parity_bits = self.chunks * deg
        self._gen_taps = np.array([(gen >> i) & 1 for i in range(deg)], dtype=np.uint8)
        self._deg = deg
        chunk_data = math.ceil(self.payload_bits / self.chunks)
        if chunk_data + deg > GF_ORDER:
            raise ModelError("chunk exceeds parent BCH length")
        self._chunk_data = chunk_data

    @property
    def rate(self) -> float:
        return self.payload_bits / (self.payload_bits + self.parity_bits)

    def _chunk_ranges(self):
        for k in range(self.chunks):
            lo = k * self._chunk_data
            yield lo, min(lo + self._chunk_data, self.payload_bits)

    def encode(self, bits: np.ndarray) -> np.ndarray:
        """Parity bits for the payload (concatenated per chunk)."""
        if len(bits) != self.payload_bits:
            raise ValueError(f"expected {self.payload_bits} payload bits")
        bits = bits.astype(np.uint8)
        parts = [_lfsr_parity(bits[lo:hi], self._gen_taps, self._deg)
                 for lo, hi in self._chunk_ranges()]
        return np.concatenate(parts)

    def check(self, bits: np.ndarray, parity: np.ndarray) -> bool:
        return np.array_equal(self.encode(bits), parity.astype(np.uint8))

    def correct(self, bits: np.ndarray, parity: np.ndarray) -> np.ndarray:
        """Correct up to t errors per chunk; raise DecodeFailure beyond that.

        The parity bits themselves are trusted (they travelled over the
        authenticated classical channel), so errors live in ``bits`` only.
        """
        if len(parity) != self.parity_bits:
            raise ValueError(f"expected {self.parity_bits} parity bits")
        bits = bits.astype(np.uint8).copy()
        parity = parity.astype(np.uint8)
        pp = self._deg
        for k, (lo, hi) in enumerate(self._chunk_ranges()):
            chunk = bits[lo:hi]
            par = parity[k * pp:(k + 1) * pp]
            # systematic codeword, highest-order position first:
            # data then parity, shortened from the parent length
            cw = np.concatenate([chunk, par])
            clen = len(cw)
            positions = np.nonzero(cw[::-1])[0].astype(np.int64)  # exponent of x
            synd = _syndromes(positions, 2 * self.t, GF_EXP)
            if not synd.any():
                continue
            sigma = _berlekamp_massey([int(s) for s in synd], self.t)
            locs = _chien_search(sigma, clen)
            if locs is None:
                raise DecodeFailure(f"outer code defeated in chunk {k}")
            for pos in locs:
                idx = clen - 1 - pos     # back to array index
                if idx >= len(chunk):
                    raise DecodeFailure("outer code located an error in its own parity")
                chunk[idx] ^= 1
            # verify the fix
            if not np.array_equal(_lfsr_parity(chunk, self._gen_taps, self._deg), par):
                raise DecodeFailure(f"outer correction failed verification in chunk {k}")
            bits[lo:hi] = chunk
        return bits
