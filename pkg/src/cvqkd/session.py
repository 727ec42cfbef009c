"""Block-by-block key distillation between Alice and Bob over a byte stream.

Bob initiates: he holds the reference data in reverse reconciliation.  Per
block the classical traffic is strictly one-way Bob -> Alice (quadrature
choices, revealed samples, syndromes, hash seeds) except for the final
KEY_CONFIRM, which carries Alice's channel estimates, the key length and a
32-bit confirmation digest; those digest bits are explicitly discarded
from the key budget.  Estimation alarms and authentication failures abort
the session; a detected decode failure only drops the block.

The quantum channel itself is simulated: both endpoints derive Alice's
modulation deterministically from the negotiated session seed and the
block id, and Bob's endpoint adds his measurement via `simkit`.

Frames are self-delimiting, so any reliable ordered byte stream works as
transport (socketpair in tests, TCP in the CLI).
"""

from __future__ import annotations

import hashlib
import hmac
import json
import os
import secrets
import struct
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import privamp
from .errors import (
    AuthenticationError,
    DecodeFailure,
    ModelError,
    NoKeyAvailable,
    ProtocolError,
)
from .estimator import (
    ParamEstimate,
    cross_check,
    estimate_params,
    estimate_t_from_test,
    lo_level_ok,
)
from .mlc import (
    LikelihoodModel,
    MultilevelSpec,
    QuantizerConfig,
    SyndromeSet,
    decode_multilevel,
    efficiency_beta,
    encode_syndromes,
)
from .mlc.ldpc import build_ldpc
from .mlc.recon import reconciled_payload
from .rates import (
    ChannelModel,
    DetectorModel,
    Modulation,
    eve_info_individual,
    mutual_info_ab,
    noise_budget,
)
from .simkit import (
    ROLE_KEY,
    ROLE_REVEAL,
    Attack,
    AttackModel,
    BlockSpec,
    modulate_block,
    transmit_measure,
)

MAGIC = b"CVQK"
VERSION = 1
TAG_LEN = 16
_HEADER = struct.Struct(">4sBBII")   # magic, version, msg_type, block_id, payload_len

MSG_HELLO = 1
MSG_BLOCK_META = 2
MSG_SIFT_REVEAL = 3
MSG_ESTIMATE_REVEAL = 4
MSG_SYNDROMES = 5
MSG_PA_SEEDS = 6
MSG_KEY_CONFIRM = 7
MSG_ABORT = 8
_KNOWN_TYPES = frozenset(range(1, 9))

ABORT_COMPLETE = 0
ABORT_ESTIMATION_ALARM = 1
ABORT_DECODE_FAILURE = 2
ABORT_AUTH_FAILURE = 3
ABORT_PROTOCOL = 4
ABORT_NO_KEY = 5

CONFIRM_DIGEST_BITS = 32


# ---------------------------------------------------------------------------
# message authentication
# ---------------------------------------------------------------------------

class MessageAuthenticator:
    """Interface for the pluggable authentication backend."""

    def tag(self, data: bytes) -> bytes:
        raise NotImplementedError

    def verify(self, data: bytes, tag: bytes) -> bool:
        raise NotImplementedError


class KeyedHashAuthenticator(MessageAuthenticator):
    """Default backend: HMAC-SHA256 truncated to 16 bytes."""

    def __init__(self, key: bytes):
        if len(key) < 16:
            raise ModelError("authentication key must be at least 16 bytes")
        self._key = key

    def tag(self, data: bytes) -> bytes:
        return hmac.new(self._key, data, hashlib.sha256).digest()[:TAG_LEN]

    def verify(self, data: bytes, tag: bytes) -> bool:
        return hmac.compare_digest(self.tag(data), tag)


# ---------------------------------------------------------------------------
# framing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WireFrame:
    msg_type: int
    block_id: int
    payload: bytes

    def encode(self, auth: MessageAuthenticator) -> bytes:
        head = _HEADER.pack(MAGIC, VERSION, self.msg_type, self.block_id,
                            len(self.payload))
        return head + self.payload + auth.tag(head + self.payload)


class FrameChannel:
    """Length-prefixed frames with authentication over a socket-like object."""

    def __init__(self, sock, auth: MessageAuthenticator):
        self._sock = sock
        self._auth = auth
        self.frames_sent = 0
        self.frames_received = 0

    def _read_exact(self, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = self._sock.recv(n - len(buf))
            if not chunk:
                raise ProtocolError("peer closed the stream mid-frame")
            buf += chunk
        return buf

    def send(self, frame: WireFrame) -> None:
        self._sock.sendall(frame.encode(self._auth))
        self.frames_sent += 1

    def recv(self) -> WireFrame:
        head = self._read_exact(_HEADER.size)
        magic, version, msg_type, block_id, plen = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ProtocolError(f"bad magic {magic!r}")
        if version != VERSION:
            raise ProtocolError(f"unsupported protocol version {version}")
        if msg_type not in _KNOWN_TYPES:
            raise ProtocolError(f"unknown message type {msg_type}")
        payload = self._read_exact(plen)
        tag = self._read_exact(TAG_LEN)
        if not self._auth.verify(head + payload, tag):
            raise AuthenticationError(f"tag verification failed on type {msg_type}")
        self.frames_received += 1
        return WireFrame(msg_type, block_id, payload)

    def expect(self, msg_type: int) -> WireFrame:
        frame = self.recv()
        if frame.msg_type == MSG_ABORT and msg_type != MSG_ABORT:
            reason = frame.payload[0] if frame.payload else 255
            raise SessionAborted(reason, frame.payload[1:].decode("utf-8", "replace"))
        if frame.msg_type != msg_type:
            raise ProtocolError(f"expected type {msg_type}, got {frame.msg_type}")
        return frame


class SessionAborted(Exception):
    def __init__(self, reason: int, message: str = ""):
        self.reason = reason
        self.message = message
        super().__init__(f"session abort {reason}: {message}")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class SessionConfig:
    """Shared session parameters; the HELLO exchange pins them bit-exactly."""

    # block framing (key pulses must equal the reconciliation frame length)
    total_pulses: int = 18_000
    test_pulses: int = 2_000
    reveal_pulses: int = 6_000
    # physics
    modulation_variance: float = 18.5
    transmission: float = 0.302
    excess_noise: float = 0.005
    efficiency: float = 0.606
    electronic_noise: float = 0.041
    rep_rate: float = 350e3
    attack: str = "none"
    # reconciliation
    level_rates: tuple = (0.0, 0.0, 0.42, 0.95)
    outer_rate: float = 0.998
    inner_iterations: int = 200
    level_sweeps: int = 5
    quantizer_width_over_sigma: float = 0.3515
    code_seed: int = 20_250_101
    # privacy amplification
    security_bits: int = 30
    # session
    num_blocks: int = 10
    session_seed: int = 1
    bob_seed: int = 2
    auth_key_hex: str = "00" * 32
    cumulative_estimates: bool = True
    estimate_window_blocks: int = 5
    alarm_sigma: float = 3.0

    def __post_init__(self):
        if isinstance(self.level_rates, list):
            self.level_rates = tuple(self.level_rates)
        if self.block_length < 1_000:
            raise ModelError("desk blocks need >= 1000 key pulses")

    @property
    def block_length(self) -> int:
        return self.total_pulses - self.test_pulses - self.reveal_pulses

    @property
    def modulation(self) -> Modulation:
        return Modulation(self.modulation_variance)

    @property
    def detector(self) -> DetectorModel:
        return DetectorModel(self.efficiency, self.electronic_noise)

    @property
    def channel(self) -> ChannelModel:
        return ChannelModel(self.transmission, self.excess_noise)

    @property
    def multilevel(self) -> MultilevelSpec:
        return MultilevelSpec(self.level_rates, self.block_length,
                              self.outer_rate, self.inner_iterations,
                              self.level_sweeps)

    def nominal_likelihood(self) -> LikelihoodModel:
        return LikelihoodModel.from_models(self.modulation, self.channel,
                                           self.detector)

    def quantizer(self) -> QuantizerConfig:
        width = self.quantizer_width_over_sigma * self.nominal_likelihood().output_std
        return QuantizerConfig(width, len(self.level_rates))

    def auth_key(self) -> bytes:
        return bytes.fromhex(self.auth_key_hex)

    def hello_digest(self) -> dict:
        d = asdict(self)
        d["level_rates"] = list(self.level_rates)
        d["version"] = VERSION
        return d


def load_config(path, overrides: dict | None = None) -> SessionConfig:
    """Flat key-value config file; later flags override file entries."""
    values: dict = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ModelError(f"bad config line: {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            values[key] = raw
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    kwargs = {}
    for key, raw in values.items():
        if key not in SessionConfig.__dataclass_fields__:
            raise ModelError(f"unknown config key {key!r}")
        current = SessionConfig.__dataclass_fields__[key]
        typ = current.type
        if isinstance(raw, str):
            if typ in ("int", int):
                kwargs[key] = int(raw)
            elif typ in ("float", float):
                kwargs[key] = float(raw)
            elif typ in ("bool", bool):
                kwargs[key] = raw.lower() in ("1", "true", "yes")
            elif typ == "tuple":
                kwargs[key] = tuple(float(x) for x in raw.replace(",", " ").split())
            else:
                kwargs[key] = raw
        else:
            kwargs[key] = raw
    return SessionConfig(**kwargs)


def _derive_seed(session_seed: int, block_id: int, purpose: str) -> int:
    h = hashlib.sha256(f"{session_seed}:{block_id}:{purpose}".encode()).digest()
    return int.from_bytes(h[:8], "little")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class BlockRecord:
    block_id: int
    t_hat: float = 0.0
    eps_hat: float = 0.0
    delta_i_eff: float = 0.0
    key_bits: int = 0
    decode_iterations: int = 0
    outcome: str = "pending"   # confirmed | dropped_decode | no_key | alarm
    latency_s: float = 0.0


@dataclass
class SessionReport:
    role: str
    blocks: list = field(default_factory=list)
    blocks_confirmed: int = 0
    blocks_dropped_decode: int = 0
    blocks_no_key: int = 0
    alarms: list = field(default_factory=list)
    key_bits_total: int = 0
    wall_time_s: float = 0.0
    symbols_processed: int = 0
    beta: float = 0.0
    p_fail: float = 0.0
    net_key_rate_bps: float = 0.0
    projected_rate_bps: float = 0.0
    reconciliation_symbols_per_s: float = 0.0
    mean_delta_i_eff: float = 0.0

    def finalize(self, rep_rate: float) -> None:
        attempted = len(self.blocks)
        decode_attempts = self.blocks_confirmed + self.blocks_dropped_decode + self.blocks_no_key
        self.p_fail = (self.blocks_dropped_decode / decode_attempts
                       if decode_attempts else 0.0)
        self.net_key_rate_bps = (self.key_bits_total / self.wall_time_s
                                 if self.wall_time_s > 0 else 0.0)
        confirmed = [b for b in self.blocks if b.outcome == "confirmed"]
        if confirmed:
            self.mean_delta_i_eff = sum(b.delta_i_eff for b in confirmed) / len(confirmed)
        self.projected_rate_bps = (self.mean_delta_i_eff * (1.0 - self.p_fail)
                                   * rep_rate)
        if self.wall_time_s > 0:
            self.reconciliation_symbols_per_s = self.symbols_processed / self.wall_time_s

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, indent=2)


class KeyWriter:
    """Accumulates confirmed key bits; rewrites the key file atomically per block."""

    def __init__(self, path, sidecar_path=None):
        self.path = path
        self.sidecar_path = sidecar_path
        self._bits: list[np.ndarray] = []
        self._sidecar_lines: list[str] = []

    @property
    def total_bits(self) -> int:
        return int(sum(len(b) for b in self._bits))

    def append(self, block_id: int, key_bits: np.ndarray,
               report: privamp.AmplificationReport) -> None:
        self._bits.append(np.asarray(key_bits, dtype=np.uint8))
        self._sidecar_lines.append(json.dumps({
            "block_id": block_id, "k": report.key_bits,
            "s": report.security_bits, "extra_discard": report.extra_discard,
            "epsilon_c": report.epsilon_c,
            "log2_epsilon_excess": report.log2_epsilon_excess,
            "timestamp": time.time()}))
        self.flush()

    def flush(self) -> None:
        if self.path is None:
            return
        packed = np.packbits(np.concatenate(self._bits), bitorder="little") \
            if self._bits else np.empty(0, dtype=np.uint8)
        tmp = str(self.path) + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(packed.tobytes())
        os.replace(tmp, self.path)
        if self.sidecar_path is not None:
            with open(self.sidecar_path, "w") as fh:
                fh.write("\n".join(self._sidecar_lines))
                if self._sidecar_lines:
                    fh.write("\n")

    def key_bits(self) -> np.ndarray:
        return (np.concatenate(self._bits) if self._bits
                else np.empty(0, dtype=np.uint8))


# ---------------------------------------------------------------------------
# payload packing helpers
# ---------------------------------------------------------------------------

def _pack_syndromes(s: SyndromeSet, spec: MultilevelSpec) -> bytes:
    parts = [struct.pack("<d", s.interval_width)]
    for j in spec.disclosed_levels:
        blob = s.disclosed_planes[j].tobytes()
        parts.append(struct.pack("<I", len(blob)))
        parts.append(blob)
    for j in spec.coded_levels:
        blob = s.level_syndromes[j].tobytes()
        parts.append(struct.pack("<II", s.syndrome_lengths[j], len(blob)))
        parts.append(blob)
    blob = s.outer_parity.tobytes()
    parts.append(struct.pack("<II", s.outer_parity_len, len(blob)))
    parts.append(blob)
    return b"".join(parts)


def _unpack_syndromes(payload: bytes, spec: MultilevelSpec, block_id: int,
                      code_seeds: dict) -> SyndromeSet:
    off = 0
    (width,) = struct.unpack_from("<d", payload, off)
    off += 8
    disclosed = {}
    for j in spec.disclosed_levels:
        (blen,) = struct.unpack_from("<I", payload, off)
        off += 4
        disclosed[j] = np.frombuffer(payload, dtype=np.uint8, count=blen, offset=off).copy()
        off += blen
    syndromes = {}
    synd_len = {}
    for j in spec.coded_levels:
        nbits, blen = struct.unpack_from("<II", payload, off)
        off += 8
        syndromes[j] = np.frombuffer(payload, dtype=np.uint8, count=blen, offset=off).copy()
        synd_len[j] = nbits
        off += blen
    nbits, blen = struct.unpack_from("<II", payload, off)
    off += 8
    parity = np.frombuffer(payload, dtype=np.uint8, count=blen, offset=off).copy()
    off += blen
    if off != len(payload):
        raise ProtocolError("syndrome payload has trailing bytes")
    return SyndromeSet(block_id=block_id, interval_width=width,
                       level_rates=spec.level_rates, disclosed_planes=disclosed,
                       level_syndromes=syndromes, syndrome_lengths=synd_len,
                       outer_parity=parity, outer_parity_len=nbits,
                       code_seeds=code_seeds)


def _pack_seeds(seed: privamp.HashSeed, s_bits: int) -> bytes:
    vec = seed.stage1.astype("<u4").tobytes()
    s2 = seed.stage2.to_bytes((privamp.INTERMEDIATE_BITS + 7) // 8, "little")
    return struct.pack("<I", s_bits) + vec + s2


def _unpack_seeds(payload: bytes):
    (s_bits,) = struct.unpack_from("<I", payload, 0)
    off = 4
    vec = np.frombuffer(payload, dtype="<u4", count=privamp.VECTOR_LEN,
                        offset=off).astype(np.int64)
    off += 4 * privamp.VECTOR_LEN
    s2 = int.from_bytes(payload[off:], "little")
    return privamp.HashSeed(stage1=vec, stage2=s2), s_bits


def _confirm_digest(auth_key: bytes, block_id: int, key_bits: np.ndarray) -> bytes:
    packed = np.packbits(key_bits, bitorder="little").tobytes()
    mac = hmac.new(auth_key, b"key-confirm" + struct.pack(">I", block_id) + packed,
                   hashlib.sha256).digest()
    return mac[:CONFIRM_DIGEST_BITS // 8]


# ---------------------------------------------------------------------------
# shared session pieces
# ---------------------------------------------------------------------------

class _Endpoint:
    def __init__(self, conn, config: SessionConfig, key_path=None, sidecar_path=None):
        self.config = config
        self.auth = KeyedHashAuthenticator(config.auth_key())
        self.chan = FrameChannel(conn, self.auth)
        self.writer = KeyWriter(key_path, sidecar_path)
        self.spec = config.multilevel
        self.quantizer = config.quantizer()
        self.codes = {j: build_ldpc(config.block_length, config.level_rates[j],
                                    config.code_seed + j)
                      for j in self.spec.coded_levels}
        self.outer = self.spec.outer_code()
        # the efficiency used in the key budget counts every disclosed bit
        self.beta = efficiency_beta(self.spec, self.quantizer,
                                    config.nominal_likelihood(), include_outer=True)
        self._reveal_a: list[np.ndarray] = []
        self._reveal_b: list[np.ndarray] = []

    def delta_i_eff(self, t_hat: float, eps_hat: float) -> float:
        ch = ChannelModel(min(max(t_hat, 1e-9), 1.0), max(eps_hat, 0.0))
        mod, det = self.config.modulation, self.config.detector
        i_ab = mutual_info_ab(mod, noise_budget(ch, det))
        i_be = eve_info_individual(mod, ch, det)
        return self.beta * i_ab - i_be

    def estimate(self, a: np.ndarray, b: np.ndarray, block_id: int) -> ParamEstimate:
        if self.config.cumulative_estimates:
            # sliding window: tight estimates without letting one unlucky
            # reveal chunk poison the rest of the session
            self._reveal_a.append(a)
            self._reveal_b.append(b)
            w = max(1, self.config.estimate_window_blocks)
            a = np.concatenate(self._reveal_a[-w:])
            b = np.concatenate(self._reveal_b[-w:])
        return estimate_params(a, b, self.config.efficiency,
                               self.config.electronic_noise,
                               self.config.modulation_variance,
                               seed=_derive_seed(self.config.session_seed,
                                                 block_id, "bootstrap"))


def _hello_payload(config: SessionConfig) -> bytes:
    return json.dumps(config.hello_digest(), sort_keys=True).encode()


# ---------------------------------------------------------------------------
# Bob (initiator, reference side)
# ---------------------------------------------------------------------------

def run_bob(conn, config: SessionConfig, key_path=None, sidecar_path=None) -> SessionReport:
    ep = _Endpoint(conn, config, key_path, sidecar_path)
    report = SessionReport(role="bob", beta=ep.beta)
    t_start = time.perf_counter()
    attack = AttackModel(Attack(config.attack))
    rng = np.random.default_rng(config.bob_seed)

    ep.chan.send(WireFrame(MSG_HELLO, 0, _hello_payload(config)))
    reply = ep.chan.expect(MSG_HELLO)
    if reply.payload != _hello_payload(config):
        raise ProtocolError("HELLO configuration mismatch")

    try:
        for block_id in range(config.num_blocks):
            rec = BlockRecord(block_id=block_id)
            report.blocks.append(rec)
            t_block = time.perf_counter()

            spec = BlockSpec(config.total_pulses, config.test_pulses,
                             config.reveal_pulses,
                             seed=_derive_seed(config.session_seed, block_id, "mod"))
            block = modulate_block(spec, config.modulation, block_id)
            block = transmit_measure(block, config.channel, config.detector,
                                     attack, seed=int(rng.integers(0, 2 ** 62)))
            report.symbols_processed += config.block_length

            ep.chan.send(WireFrame(MSG_BLOCK_META, block_id,
                                   struct.pack("<d", block.lo_level)))
            choices = np.packbits(block.bob_choice, bitorder="little").tobytes()
            ep.chan.send(WireFrame(MSG_SIFT_REVEAL, block_id, choices))

            reveal_idx = np.nonzero(block.roles == ROLE_REVEAL)[0].astype("<u4")
            reveal_out = block.bob_outcome[reveal_idx].astype("<f8")
            test_out = block.bob_outcome[:config.test_pulses].astype("<f8")
            payload = (struct.pack("<I", len(reveal_idx)) + reveal_idx.tobytes()
                       + reveal_out.tobytes() + test_out.tobytes())
            ep.chan.send(WireFrame(MSG_ESTIMATE_REVEAL, block_id, payload))

            key_sel = block.roles == ROLE_KEY
            labels = ep.quantizer.quantize(block.bob_outcome[key_sel])
            synd = encode_syndromes(labels, ep.spec, ep.codes, ep.quantizer,
                                    block_id, ep.outer)
            ep.chan.send(WireFrame(MSG_SYNDROMES, block_id,
                                   _pack_syndromes(synd, ep.spec)))

            seed = privamp.HashSeed.generate(rng)
            ep.chan.send(WireFrame(MSG_PA_SEEDS, block_id,
                                   _pack_seeds(seed, config.security_bits)))

            # wait for Alice's verdict on this block
            try:
                frame = ep.chan.expect(MSG_KEY_CONFIRM)
            except SessionAborted as abort:
                if abort.reason == ABORT_DECODE_FAILURE:
                    rec.outcome = "dropped_decode"
                    report.blocks_dropped_decode += 1
                    rec.latency_s = time.perf_counter() - t_block
                    continue
                if abort.reason == ABORT_NO_KEY:
                    rec.outcome = "no_key"
                    report.blocks_no_key += 1
                    rec.latency_s = time.perf_counter() - t_block
                    continue
                raise
            t_hat, eps_hat, k, s_bits = struct.unpack_from("<ddII", frame.payload, 0)
            digest = frame.payload[struct.calcsize("<ddII"):]
            d_eff = ep.delta_i_eff(t_hat, eps_hat)
            k_check = privamp.key_length(config.block_length, d_eff, s_bits,
                                         CONFIRM_DIGEST_BITS)
            if k != k_check or s_bits != config.security_bits:
                raise ProtocolError(f"key budget mismatch: {k} != {k_check}")
            payload_bits = reconciled_payload(labels, ep.spec, ep.quantizer)
            key, pa_report = privamp.privacy_amplify(
                payload_bits, d_eff, config.block_length, s_bits, seed,
                extra_discard=CONFIRM_DIGEST_BITS)
            if not hmac.compare_digest(digest,
                                       _confirm_digest(config.auth_key(), block_id, key)):
                raise ProtocolError("key confirmation digest mismatch")
            ep.writer.append(block_id, key, pa_report)
            rec.outcome = "confirmed"
            rec.t_hat, rec.eps_hat, rec.delta_i_eff, rec.key_bits = t_hat, eps_hat, d_eff, k
            rec.latency_s = time.perf_counter() - t_block
            report.blocks_confirmed += 1
            report.key_bits_total += k
        ep.chan.send(WireFrame(MSG_ABORT, config.num_blocks,
                               bytes([ABORT_COMPLETE]) + b"session complete"))
    except SessionAborted as abort:
        report.alarms.append({"reason": abort.reason, "message": abort.message})
        if report.blocks and report.blocks[-1].outcome == "pending":
            report.blocks[-1].outcome = "alarm"
    report.wall_time_s = time.perf_counter() - t_start
    report.finalize(config.rep_rate)
    return report


# ---------------------------------------------------------------------------
# Alice (decoder side)
# ---------------------------------------------------------------------------

def run_alice(conn, config: SessionConfig, key_path=None, sidecar_path=None) -> SessionReport:
    ep = _Endpoint(conn, config, key_path, sidecar_path)
    report = SessionReport(role="alice", beta=ep.beta)
    t_start = time.perf_counter()

    hello = ep.chan.expect(MSG_HELLO)
    if hello.payload != _hello_payload(config):
        ep.chan.send(WireFrame(MSG_ABORT, 0,
                               bytes([ABORT_PROTOCOL]) + b"config mismatch"))
        raise ProtocolError("HELLO configuration mismatch")
    ep.chan.send(WireFrame(MSG_HELLO, 0, _hello_payload(config)))

    while True:
        frame = ep.chan.recv()
        if frame.msg_type == MSG_ABORT:
            reason = frame.payload[0] if frame.payload else 255
            if reason != ABORT_COMPLETE:
                report.alarms.append({"reason": reason,
                                      "message": frame.payload[1:].decode("utf-8", "replace")})
            break
        if frame.msg_type != MSG_BLOCK_META:
            raise ProtocolError(f"expected BLOCK_META, got type {frame.msg_type}")
        block_id = frame.block_id
        rec = BlockRecord(block_id=block_id)
        report.blocks.append(rec)
        t_block = time.perf_counter()
        (lo_level,) = struct.unpack("<d", frame.payload)

        spec = BlockSpec(config.total_pulses, config.test_pulses,
                         config.reveal_pulses,
                         seed=_derive_seed(config.session_seed, block_id, "mod"))
        block = modulate_block(spec, config.modulation, block_id)
        report.symbols_processed += config.block_length

        sift_frame = ep.chan.expect(MSG_SIFT_REVEAL)
        choices = np.unpackbits(np.frombuffer(sift_frame.payload, dtype=np.uint8),
                                count=config.total_pulses, bitorder="little")
        alice_retained = np.where(choices == 0, block.alice_x, block.alice_p)

        est_frame = ep.chan.expect(MSG_ESTIMATE_REVEAL)
        (n_reveal,) = struct.unpack_from("<I", est_frame.payload, 0)
        off = 4
        reveal_idx = np.frombuffer(est_frame.payload, dtype="<u4", count=n_reveal,
                                   offset=off).astype(np.int64)
        off += 4 * n_reveal
        reveal_out = np.frombuffer(est_frame.payload, dtype="<f8", count=n_reveal,
                                   offset=off)
        off += 8 * n_reveal
        test_out = np.frombuffer(est_frame.payload, dtype="<f8",
                                 count=config.test_pulses, offset=off)

        synd_frame = ep.chan.expect(MSG_SYNDROMES)
        synd = _unpack_syndromes(synd_frame.payload, ep.spec, block_id,
                                 {j: c.seed for j, c in ep.codes.items()})
        seeds_frame = ep.chan.expect(MSG_PA_SEEDS)
        seed, s_bits = _unpack_seeds(seeds_frame.payload)

        # --- parameter estimation and alarms -----------------------------
        est = ep.estimate(alice_retained[reveal_idx], reveal_out, block_id)
        t_test, t_test_se = estimate_t_from_test(alice_retained[:config.test_pulses],
                                                 test_out, config.efficiency)
        rec.t_hat, rec.eps_hat = est.t_hat, est.eps_hat
        alarm = None
        if not lo_level_ok(lo_level):
            alarm = f"LO level {lo_level:.3f} outside tolerance"
        elif not cross_check(est.t_hat, est.t_stderr, t_test, t_test_se,
                             config.alarm_sigma):
            alarm = (f"transmission cross-check failed: "
                     f"subset {est.t_hat:.4f} vs test {t_test:.4f}")
        elif est.eps_hat > config.excess_noise + config.alarm_sigma * est.eps_stderr:
            alarm = (f"excess noise {est.eps_hat:.3f} exceeds nominal "
                     f"{config.excess_noise} by more than {config.alarm_sigma} sigma")
        if alarm is not None:
            report.alarms.append({"reason": ABORT_ESTIMATION_ALARM, "message": alarm})
            ep.chan.send(WireFrame(MSG_ABORT, block_id,
                                   bytes([ABORT_ESTIMATION_ALARM]) + alarm.encode()))
            rec.outcome = "alarm"
            break
        d_eff = ep.delta_i_eff(est.t_hat, est.eps_hat)
        rec.delta_i_eff = d_eff
        if privamp.key_length(config.block_length, d_eff, config.security_bits,
                              CONFIRM_DIGEST_BITS) < 1:
            # statistically unlucky block: no budget for a key, skip the decode
            rec.outcome = "no_key"
            report.blocks_no_key += 1
            ep.chan.send(WireFrame(MSG_ABORT, block_id,
                                   bytes([ABORT_NO_KEY])
                                   + f"key budget empty at dI_eff={d_eff:.5f}".encode()))
            rec.latency_s = time.perf_counter() - t_block
            continue

        # --- reconciliation ----------------------------------------------
        key_sel = block.roles == ROLE_KEY
        channel = LikelihoodModel.from_estimate(est.t_hat, est.eps_hat,
                                                config.detector, config.modulation)
        result = decode_multilevel(alice_retained[key_sel], synd, ep.spec,
                                   ep.codes, channel, ep.outer)
        rec.decode_iterations = sum(result.iterations.values())
        if not result.ok:
            rec.outcome = "dropped_decode"
            report.blocks_dropped_decode += 1
            ep.chan.send(WireFrame(MSG_ABORT, block_id,
                                   bytes([ABORT_DECODE_FAILURE])
                                   + result.failure_reason.encode()))
            rec.latency_s = time.perf_counter() - t_block
            continue

        # --- privacy amplification ----------------------------------------
        payload_bits = reconciled_payload(result.labels, ep.spec, ep.quantizer)
        try:
            key, pa_report = privamp.privacy_amplify(
                payload_bits, rec.delta_i_eff, config.block_length,
                config.security_bits, seed, extra_discard=CONFIRM_DIGEST_BITS)
        except NoKeyAvailable as exc:
            rec.outcome = "no_key"
            report.blocks_no_key += 1
            ep.chan.send(WireFrame(MSG_ABORT, block_id,
                                   bytes([ABORT_NO_KEY]) + str(exc).encode()))
            rec.latency_s = time.perf_counter() - t_block
            continue
        digest = _confirm_digest(config.auth_key(), block_id, key)
        confirm = struct.pack("<ddII", est.t_hat, est.eps_hat,
                              pa_report.key_bits, config.security_bits) + digest
        ep.chan.send(WireFrame(MSG_KEY_CONFIRM, block_id, confirm))
        ep.writer.append(block_id, key, pa_report)
        rec.outcome = "confirmed"
        rec.key_bits = pa_report.key_bits
        rec.latency_s = time.perf_counter() - t_block
        report.blocks_confirmed += 1
        report.key_bits_total += pa_report.key_bits

    report.wall_time_s = time.perf_counter() - t_start
    report.finalize(config.rep_rate)
    return report


def generate_auth_key() -> str:
    return secrets.token_hex(32)
