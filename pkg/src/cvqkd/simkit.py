"""Statistical stand-in for the optics: Gaussian modulation, channel, homodyne.

The quantum channel is simulated at the level of its sufficient statistics:
Bob's outcome on his randomly chosen quadrature is sqrt(eta T) times
Alice's value plus Gaussian noise of variance 1 + v_el + eta T eps, so
Var(bob) = eta T V_A + eta T eps + 1 + v_el and Cov(alice, bob) =
sqrt(eta T) V_A, exactly the moments the security analysis consumes.  An
intercept-resend attacker heterodynes and re-prepares, which adds two shot
noise units of excess noise at the channel input.

Blocks are framed as in the experiment: test pulses with an agreed
pattern, a revealed random subset for parameter estimation, and key
pulses.  Everything is deterministic given the seeds.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ModelError
from .rates import ChannelModel, DetectorModel, Modulation

ROLE_TEST = 0
ROLE_REVEAL = 1
ROLE_KEY = 2

_MAGIC = b"CVQB"
_VERSION = 1
_HEADER = struct.Struct("<4sBBHII")      # magic, version, flags, reserved, total, test
_EXT = struct.Struct("<IId")             # reveal, block_id, modulation variance
_RECORD = np.dtype([("alice_x", "<f8"), ("alice_p", "<f8"),
                    ("bob_outcome", "<f8"), ("bob_choice", "u1"), ("role", "u1")])


class Attack(Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept_resend"


@dataclass(frozen=True)
class AttackModel:
    variant: Attack = Attack.NONE

    @property
    def added_input_noise(self) -> float:
        """Excess noise (shot-noise units, at channel input) the attack injects."""
        return 2.0 if self.variant is Attack.INTERCEPT_RESEND else 0.0


@dataclass(frozen=True)
class BlockSpec:
    total_pulses: int = 50_000
    test_pulses: int = 10_000
    reveal_pulses: int = 5_000
    seed: int = 0

    def __post_init__(self):
        if self.test_pulses + self.reveal_pulses >= self.total_pulses:
            raise ModelError("test + reveal must leave room for key pulses")
        if min(self.total_pulses, self.test_pulses, self.reveal_pulses) < 0:
            raise ModelError("pulse counts must be non-negative")

    @property
    def key_pulses(self) -> int:
        return self.total_pulses - self.test_pulses - self.reveal_pulses


@dataclass
class SymbolBlock:
    """One framed block of pulses; Bob's fields are None until measured."""

    spec: BlockSpec
    block_id: int
    modulation_variance: float
    alice_x: np.ndarray
    alice_p: np.ndarray
    roles: np.ndarray
    bob_choice: np.ndarray | None = None   # 0 = x quadrature, 1 = p
    bob_outcome: np.ndarray | None = None
    lo_level: float = 1.0                  # monitored local-oscillator level

    @property
    def measured(self) -> bool:
        return self.bob_outcome is not None


def _role_array(spec: BlockSpec, rng: np.random.Generator) -> np.ndarray:
    """Test pulses first (agreed positions), reveal drawn from the remainder."""
    roles = np.full(spec.total_pulses, ROLE_KEY, dtype=np.uint8)
    roles[:spec.test_pulses] = ROLE_TEST
    rest = np.arange(spec.test_pulses, spec.total_pulses)
    reveal = rng.choice(rest, size=spec.reveal_pulses, replace=False)
    roles[reveal] = ROLE_REVEAL
    return roles


def modulate_block(spec: BlockSpec, mod: Modulation, block_id: int = 0) -> SymbolBlock:
    """Alice's half: i.i.d. N(0, V_A) per quadrature, plus the test pattern.

    Test pulses carry constant amplitude sqrt(V_A) with the phase stepping
    0, pi/2, 0, pi/2, ... so both quadratures get exercised: even test
    pulses are (sqrt(V_A), 0), odd ones (0, sqrt(V_A)).
    """
    rng = np.random.default_rng(spec.seed)
    roles = _role_array(spec, rng)
    sigma = np.sqrt(mod.variance)
    x = rng.normal(0.0, sigma, spec.total_pulses) if sigma > 0 else np.zeros(spec.total_pulses)
    p = rng.normal(0.0, sigma, spec.total_pulses) if sigma > 0 else np.zeros(spec.total_pulses)
    idx = np.arange(spec.test_pulses)
    amp = np.sqrt(mod.variance)
    x[:spec.test_pulses] = np.where(idx % 2 == 0, amp, 0.0)
    p[:spec.test_pulses] = np.where(idx % 2 == 0, 0.0, amp)
    return SymbolBlock(spec=spec, block_id=block_id,
                       modulation_variance=mod.variance,
                       alice_x=x, alice_p=p, roles=roles)


def transmit_measure(block: SymbolBlock, ch: ChannelModel, det: DetectorModel,
                     attack: AttackModel = AttackModel(), seed: int = 1,
                     lo_level: float = 1.0) -> SymbolBlock:
    """Complete the block with Bob's quadrature choices and outcomes.

    ``lo_level`` is the per-block local-oscillator monitor value; injecting
    a deviation here lets the estimator's monitoring alarm be exercised
    without any optics.
    """
    rng = np.random.default_rng(seed)
    n = block.spec.total_pulses
    choice = rng.integers(0, 2, n).astype(np.uint8)
    a = np.where(choice == 0, block.alice_x, block.alice_p)
    if attack.added_input_noise > 0.0:
        a = a + rng.normal(0.0, np.sqrt(attack.added_input_noise), n)
    eta_t = det.efficiency * ch.transmission
    noise_std = np.sqrt(1.0 + det.electronic_noise + eta_t * ch.excess_noise)
    outcome = np.sqrt(eta_t) * a + rng.normal(0.0, noise_std, n)
    block.bob_choice = choice
    block.bob_outcome = outcome
    block.lo_level = lo_level
    return block


def sift(block: SymbolBlock):
    """Pair Alice's retained quadrature with Bob's outcome, key+reveal only.

    Returns (alice_values, bob_outcomes, reveal_mask) in pulse order with
    test pulses removed.
    """
    if not block.measured:
        raise ModelError("block has no measurements to sift")
    keep = block.roles != ROLE_TEST
    a = np.where(block.bob_choice == 0, block.alice_x, block.alice_p)[keep]
    b = block.bob_outcome[keep]
    reveal = (block.roles == ROLE_REVEAL)[keep]
    return a, b, reveal


def probe_pulse_pairs(block: SymbolBlock):
    """Alice's agreed value on Bob's quadrature and his outcome, test pulses only."""
    if not block.measured:
        raise ModelError("block has no measurements")
    sel = block.roles == ROLE_TEST
    a = np.where(block.bob_choice == 0, block.alice_x, block.alice_p)[sel]
    return a, block.bob_outcome[sel]


# ---------------------------------------------------------------------------
# replay files
# ---------------------------------------------------------------------------

def write_block(block: SymbolBlock, path) -> None:
    """Binary replay format: 16-byte header, 16-byte extension, flat records."""
    if not block.measured:
        raise ModelError("only completed blocks are serialized")
    rec = np.empty(block.spec.total_pulses, dtype=_RECORD)
    rec["alice_x"] = block.alice_x
    rec["alice_p"] = block.alice_p
    rec["bob_outcome"] = block.bob_outcome
    rec["bob_choice"] = block.bob_choice
    rec["role"] = block.roles
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, 0, 0,
                              block.spec.total_pulses, block.spec.test_pulses))
        fh.write(_EXT.pack(block.spec.reveal_pulses, block.block_id,
                           block.modulation_variance))
        fh.write(rec.tobytes())


def read_block(path) -> SymbolBlock:
    with open(path, "rb") as fh:
        magic, version, _flags, _rsv, total, test = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ModelError(f"not a block file: bad magic {magic!r}")
        if version != _VERSION:
            raise ModelError(f"unsupported block file version {version}")
        reveal, block_id, var = _EXT.unpack(fh.read(_EXT.size))
        rec = np.frombuffer(fh.read(total * _RECORD.itemsize), dtype=_RECORD)
    if len(rec) != total:
        raise ModelError("truncated block file")
    spec = BlockSpec(total, test, reveal)
    return SymbolBlock(spec=spec, block_id=block_id, modulation_variance=var,
                       alice_x=rec["alice_x"].copy(), alice_p=rec["alice_p"].copy(),
                       roles=rec["role"].copy(), bob_choice=rec["bob_choice"].copy(),
                       bob_outcome=rec["bob_outcome"].copy())
