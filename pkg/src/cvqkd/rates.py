"""Secret key rates for the reverse-reconciliation coherent-state protocol.

Everything here is closed-form: mutual information between Alice and Bob,
the bound on an individual (Shannon) eavesdropper, the Holevo bound on a
collective eavesdropper, and the raw/effective per-symbol and per-second
secret rates derived from them.  All variances are expressed in shot-noise
units (N0 = 1), which removes the one free scale from the problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ModelError, NumericDomainError

LOG2E = math.log2(math.e)

# Tiny negative discriminants are a floating-point artifact of near-pure
# states and get clamped; anything below this is treated as a real error.
DISCRIMINANT_TOL = -1e-9


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelModel:
    """Quantum channel: transmission T and excess noise eps (shot-noise units)."""

    transmission: float
    excess_noise: float

    def __post_init__(self):
        if not 0.0 < self.transmission <= 1.0:
            raise ModelError(f"transmission must be in (0, 1], got {self.transmission}")
        if self.excess_noise < 0.0:
            raise ModelError(f"excess noise must be >= 0, got {self.excess_noise}")


@dataclass(frozen=True)
class DetectorModel:
    """Homodyne detector: efficiency eta and electronic noise v_el."""

    efficiency: float
    electronic_noise: float

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ModelError(f"efficiency must be in (0, 1], got {self.efficiency}")
        if self.electronic_noise < 0.0:
            raise ModelError(f"electronic noise must be >= 0, got {self.electronic_noise}")

    @property
    def thermal_variance(self) -> float:
        """Variance V_N of the thermal state modelling the electronic noise.

        V_N = 1 + v_el / (1 - eta).  Diverges for a lossless detector with
        nonzero electronic noise; returns 1.0 for the ideal detector.
        """
        if self.efficiency == 1.0:
            return 1.0 if self.electronic_noise == 0.0 else math.inf
        return 1.0 + self.electronic_noise / (1.0 - self.efficiency)


@dataclass(frozen=True)
class Modulation:
    """Alice's Gaussian modulation of variance V_A (per quadrature)."""

    variance: float
    shot_noise: float = 1.0  # N0, fixed by normalization convention

    def __post_init__(self):
        if self.variance < 0.0:
            raise ModelError(f"modulation variance must be >= 0, got {self.variance}")
        if self.shot_noise != 1.0:
            raise ModelError("shot noise is normalized to 1 throughout")

    @property
    def v(self) -> float:
        """Total variance V = V_A + 1 of the equivalent thermal state."""
        return self.variance + 1.0


@dataclass(frozen=True)
class NoiseBudget:
    """Added noises referred to the channel input, in shot-noise units."""

    chi_line: float
    chi_hom: float
    chi_tot: float


@dataclass
class RateReport:
    """Full per-symbol and per-second rate set for one operating point."""

    i_ab: float
    i_be: float
    chi_be: float
    delta_shannon_raw: float
    delta_holevo_raw: float
    delta_shannon_eff: float
    delta_holevo_eff: float
    rep_rate: float
    beta: float
    p_fail: float
    # symplectic eigenvalues and their quadratic invariants, kept for testability
    lambdas: tuple = ()
    holevo_a: float = 0.0
    holevo_b: float = 0.0
    holevo_c: float = 0.0
    holevo_d: float = 0.0
    budget: NoiseBudget = field(default_factory=lambda: NoiseBudget(0.0, 0.0, 0.0))

    def per_second(self, value_per_symbol: float) -> float:
        return value_per_symbol * self.rep_rate

    @property
    def i_ab_per_s(self) -> float:
        return self.i_ab * self.rep_rate

    @property
    def i_be_per_s(self) -> float:
        return self.i_be * self.rep_rate

    @property
    def chi_be_per_s(self) -> float:
        return self.chi_be * self.rep_rate

    @property
    def delta_shannon_raw_per_s(self) -> float:
        return self.delta_shannon_raw * self.rep_rate

    @property
    def delta_holevo_raw_per_s(self) -> float:
        return self.delta_holevo_raw * self.rep_rate

    @property
    def delta_shannon_eff_per_s(self) -> float:
        return self.delta_shannon_eff * self.rep_rate

    @property
    def delta_holevo_eff_per_s(self) -> float:
        return self.delta_holevo_eff * self.rep_rate


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def g_entropy(x: float) -> float:
    """Von Neumann entropy kernel G(x) = (x+1)log2(x+1) - x log2 x, in bits.

    G(0) = 0 by the x log x -> 0 limit.
    """
    if x < 0.0:
        raise NumericDomainError(f"g_entropy requires x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)


def noise_budget(ch: ChannelModel, det: DetectorModel) -> NoiseBudget:
    """Channel, detector and total added noise referred to the channel input."""
    t = ch.transmission
    chi_line = 1.0 / t - 1.0 + ch.excess_noise
    chi_hom = (1.0 + det.electronic_noise) / det.efficiency - 1.0
    return NoiseBudget(chi_line, chi_hom, chi_line + chi_hom / t)


def mutual_info_ab(mod: Modulation, budget: NoiseBudget) -> float:
    """Shannon mutual information I_AB = 1/2 log2((V + chi_tot)/(1 + chi_tot))."""
    v = mod.v
    return 0.5 * math.log2((v + budget.chi_tot) / (1.0 + budget.chi_tot))


def bob_variance(mod: Modulation, ch: ChannelModel, det: DetectorModel) -> float:
    """Variance V_B of Bob's measured quadrature, in shot-noise units."""
    b = noise_budget(ch, det)
    return det.efficiency * ch.transmission * (mod.v + b.chi_tot)


def eve_info_individual(mod: Modulation, ch: ChannelModel, det: DetectorModel) -> float:
    """Shannon bound I_BE on an individual attacker, realistic detector model.

    I_BE = 1/2 log2(V_B / V_B|E) with
    V_B   = eta T (V + chi_tot)
    V_B|E = eta [1/(T (1/V + chi_line)) + chi_hom]

    Eve gets no benefit from the detector noise chi_hom (trusted receiver).
    """
    b = noise_budget(ch, det)
    t, eta, v = ch.transmission, det.efficiency, mod.v
    v_b = eta * t * (v + b.chi_tot)
    denom = t * (1.0 / v + b.chi_line)
    if denom <= 0.0:
        raise NumericDomainError("singular conditional variance in I_BE")
    v_b_e = eta * (1.0 / denom + b.chi_hom)
    if v_b_e <= 0.0:
        raise NumericDomainError("non-positive V_B|E")
    return 0.5 * math.log2(v_b / v_b_e)


def _sym_pair(s: float, p: float) -> tuple[float, float]:
    """Roots lam^2 = (s +- sqrt(s^2-4p))/2 of the symplectic quadratic."""
    disc = s * s - 4.0 * p
    if disc < 0.0:
        if disc < DISCRIMINANT_TOL * max(1.0, s * s):
            raise NumericDomainError(f"negative symplectic discriminant {disc}")
        disc = 0.0
    r = math.sqrt(disc)
    lo = (s - r) / 2.0
    hi = (s + r) / 2.0
    if lo < 0.0:
        if lo < DISCRIMINANT_TOL * max(1.0, abs(s)):
            raise NumericDomainError(f"negative squared eigenvalue {lo}")
        lo = 0.0
    return math.sqrt(hi), math.sqrt(lo)


def holevo_bound(mod: Modulation, ch: ChannelModel, det: DetectorModel):
    """Holevo bound chi_BE for collective attacks.

    Returns (chi_be, (lam1..lam5), (A, B, C, D)).  The first pair of
    symplectic eigenvalues characterizes the joint Alice-Bob state before
    detection, the 3rd/4th the pure complement after Bob's homodyne
    projection, and lam5 = 1 always.
    """
    b = noise_budget(ch, det)
    t, v = ch.transmission, mod.v
    chi_line, chi_hom, chi_tot = b.chi_line, b.chi_hom, b.chi_tot

    a_ = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line) ** 2
    b_ = t * t * (v * chi_line + 1.0) ** 2
    lam1, lam2 = _sym_pair(a_, b_)

    sb = math.sqrt(b_)
    denom = t * (v + chi_tot)
    c_ = (v * sb + t * (v + chi_line) + a_ * chi_hom) / denom
    d_ = sb * (v + sb * chi_hom) / denom
    lam3, lam4 = _sym_pair(c_, d_)

    chi_be = (g_entropy((lam1 - 1.0) / 2.0) + g_entropy((lam2 - 1.0) / 2.0)
              - g_entropy((lam3 - 1.0) / 2.0) - g_entropy((lam4 - 1.0) / 2.0))
    return chi_be, (lam1, lam2, lam3, lam4, 1.0), (a_, b_, c_, d_)


def secret_rates(mod: Modulation, ch: ChannelModel, det: DetectorModel,
                 rep_rate: float = 350e3, beta: float = 1.0,
                 p_fail: float = 0.0) -> RateReport:
    """All raw and effective secret rates at one operating point.

    Raw rates assume ideal reconciliation (beta = 1, no frame loss); the
    effective rates apply the reconciliation efficiency and the detected
    frame-failure probability:

        dI_eff = (beta I_AB - I_E) (1 - p_fail)

    with I_E either the individual bound I_BE or the collective bound chi_BE.
    """
    if not 0.0 <= beta <= 1.0:
        raise ModelError(f"beta must be in [0, 1], got {beta}")
    if not 0.0 <= p_fail <= 1.0:
        raise ModelError(f"p_fail must be in [0, 1], got {p_fail}")
    budget = noise_budget(ch, det)
    i_ab = mutual_info_ab(mod, budget)
    i_be = eve_info_individual(mod, ch, det)
    chi_be, lambdas, abcd = holevo_bound(mod, ch, det)
    return RateReport(
        i_ab=i_ab,
        i_be=i_be,
        chi_be=chi_be,
        delta_shannon_raw=i_ab - i_be,
        delta_holevo_raw=i_ab - chi_be,
        delta_shannon_eff=(beta * i_ab - i_be) * (1.0 - p_fail),
        delta_holevo_eff=(beta * i_ab - chi_be) * (1.0 - p_fail),
        rep_rate=rep_rate,
        beta=beta,
        p_fail=p_fail,
        lambdas=lambdas,
        holevo_a=abcd[0],
        holevo_b=abcd[1],
        holevo_c=abcd[2],
        holevo_d=abcd[3],
        budget=budget,
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def transmission_from_distance(distance_km: float, loss_db_per_km: float = 0.2) -> float:
    """Fiber transmission T = 10^(-loss * d / 10)."""
    if distance_km < 0.0:
        raise ModelError("distance must be >= 0")
    return 10.0 ** (-loss_db_per_km * distance_km / 10.0)


def sweep_distance(distances_km, mod: Modulation, det: DetectorModel,
                   excess_noise: float = 0.005, loss_db_per_km: float = 0.2,
                   rep_rate: float = 350e3, beta: float = 1.0,
                   p_fail: float = 0.0):
    """Rate table along a fiber-distance grid. Returns [(d, RateReport), ...]."""
    out = []
    for d in distances_km:
        ch = ChannelModel(transmission_from_distance(d, loss_db_per_km),
                          excess_noise)
        out.append((float(d), secret_rates(mod, ch, det, rep_rate, beta, p_fail)))
    return out


def sweep_modulation(variances, ch: ChannelModel, det: DetectorModel,
                     rep_rate: float = 350e3, beta: float = 1.0,
                     p_fail: float = 0.0, eps_linear_in_va: bool = False,
                     anchor: tuple[float, float] = (18.5, 0.005)):
    """Rate table along a modulation-variance grid.

    With ``eps_linear_in_va``, the excess noise scales linearly with V_A,
    anchored at ``anchor`` = (V_A0, eps0); this models modulation-dependent
    technical noise and is what makes the effective rate unimodal in V_A.
    """
    va0, eps0 = anchor
    out = []
    for va in variances:
        eps = eps0 * float(va) / va0 if eps_linear_in_va else ch.excess_noise
        ch_i = ChannelModel(ch.transmission, eps)
        out.append((float(va),
                    secret_rates(Modulation(float(va)), ch_i, det,
                                 rep_rate, beta, p_fail)))
    return out


# Reference operating point: the 25 km experiment.
REFERENCE_MODULATION = Modulation(18.5)
REFERENCE_CHANNEL = ChannelModel(transmission=0.302, excess_noise=0.005)
REFERENCE_DETECTOR = DetectorModel(efficiency=0.606, electronic_noise=0.041)
REFERENCE_REP_RATE = 350e3   # pulses effectively used for key, per second
REFERENCE_BETA = 0.898
