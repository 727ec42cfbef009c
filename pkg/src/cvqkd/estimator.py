"""Channel-parameter recovery from revealed data.

Moment-based estimators throughout: the transmission comes from the
Alice-Bob covariance (Cov = sqrt(eta T) V_A), the excess noise from Bob's
residual variance after removing the correlated part.  eta and v_el are
trusted calibration constants, never estimated from channel data.  The
transmission is measured twice, from the agreed test pulses and from the
revealed subset, and the two values are cross-checked continuously.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, EstimationError

MIN_SAMPLES = 1_000


@dataclass(frozen=True)
class ParamEstimate:
    t_hat: float
    eps_hat: float
    t_stderr: float
    eps_stderr: float
    sample_count: int
    shot_noise_hat: float = 1.0
    shot_noise_stderr: float = 0.0


def calibrate_shot_noise(vacuum_outcomes, electronic_noise: float):
    """Shot-noise scale N0 from homodyne samples taken with zero modulation.

    The raw variance of a vacuum measurement is N0 (1 + v_el), so the scale
    is the sample variance divided by (1 + v_el); downstream data is divided
    by the result.  Returns (n0_hat, stderr).
    """
    v = np.asarray(vacuum_outcomes, dtype=float)
    if v.size < MIN_SAMPLES:
        raise CalibrationError(f"need >= {MIN_SAMPLES} vacuum samples, got {v.size}")
    var = float(v.var())
    n0 = var / (1.0 + electronic_noise)
    if n0 <= 0.0:
        raise CalibrationError("degenerate vacuum samples: non-positive shot noise")
    # variance of a Gaussian sample variance: 2 sigma^4 / (n - 1)
    stderr = math.sqrt(2.0 / (v.size - 1)) * var / (1.0 + electronic_noise)
    return n0, stderr


def estimate_params(alice_values, bob_outcomes, eta: float, v_el: float,
                    modulation_variance: float, n_bootstrap: int = 100,
                    seed: int = 0) -> ParamEstimate:
    """(T, eps) from revealed pairs, with standard errors.

    All second-order moments come from the data, V_A included:

    eta T_hat = Cov(a, b)^2 / Var(a)^2           [Cov = sqrt(eta T) V_A]
    eps_hat = (Var(b) - Cov(a,b)^2/Var(a) - 1 - v_el) / (eta T_hat)

    Using the *measured* Var(a) instead of the nominal modulation variance
    cancels the modulation's sampling fluctuation out of the excess-noise
    estimate, whose spread then hits the variance-estimation floor
    sigma_z^2 sqrt(2/n) / (eta T); with the nominal V_A it would be ~4x
    wider.  ``modulation_variance`` is kept as a sanity reference only.

    Negative eps_hat is retained (unbiased monitoring); floor it only when
    feeding rate computations.  t-standard error by the delta method on the
    covariance ratio; eps by an empirical bootstrap (the moment expression
    for its spread is unwieldy).
    """
    a = np.asarray(alice_values, dtype=float)
    b = np.asarray(bob_outcomes, dtype=float)
    if a.size != b.size:
        raise EstimationError("pair arrays differ in length")
    n = a.size
    if n < MIN_SAMPLES:
        raise EstimationError(f"need >= {MIN_SAMPLES} revealed pairs, got {n}")
    if modulation_variance <= 0.0:
        raise EstimationError("modulation variance must be positive")

    def _moments(av, bv):
        c = float(np.mean(av * bv) - av.mean() * bv.mean())
        va = float(av.var())
        vb = float(bv.var())
        eta_t = c * c / (va * va)
        eps = (vb - c * c / va - 1.0 - v_el) / eta_t
        return eta_t / eta, eps

    t_hat, eps_hat = _moments(a, b)
    if not np.isfinite(t_hat) or t_hat <= 0.0:
        raise EstimationError(f"unusable transmission estimate {t_hat}")

    # delta method: cov/var_a is the regression slope sqrt(eta T), whose
    # variance is resid_var / (n var_a); the slope's own var_a fluctuation
    # cancels inside the ratio
    var_a = float(a.var())
    var_b = float(b.var())
    cov = float(np.mean(a * b) - a.mean() * b.mean())
    resid_var = max(var_b - cov * cov / var_a, 1e-12)
    slope = abs(cov) / var_a
    t_stderr = 2.0 * slope * math.sqrt(resid_var / (n * var_a)) / eta
    if t_hat > 1.0 + 3.0 * t_stderr:
        raise EstimationError(f"t_hat = {t_hat:.4f} is inconsistent with T <= 1")

    rng = np.random.default_rng(seed)
    eps_samples = np.empty(n_bootstrap)
    for k in range(n_bootstrap):
        idx = rng.integers(0, n, n)
        _, eps_samples[k] = _moments(a[idx], b[idx])
    eps_stderr = float(eps_samples.std())

    return ParamEstimate(t_hat=t_hat, eps_hat=eps_hat,
                         t_stderr=t_stderr, eps_stderr=eps_stderr,
                         sample_count=n)


def estimate_t_from_test(agreed_values, outcomes, eta: float):
    """Transmission from the fixed-pattern test pulses.

    Regression of outcomes on the agreed amplitudes: the slope estimates
    sqrt(eta T).  Returns (t_hat, stderr).
    """
    a = np.asarray(agreed_values, dtype=float)
    b = np.asarray(outcomes, dtype=float)
    ss = float((a * a).sum())
    if ss <= 0.0:
        raise EstimationError("test pulses carry no amplitude")
    slope = float((a * b).sum()) / ss
    resid = b - slope * a
    slope_se = math.sqrt(float(resid.var()) / ss)
    if slope <= 0.0:
        raise EstimationError(f"non-positive test-pulse slope {slope}")
    t_hat = slope * slope / eta
    t_se = 2.0 * slope * slope_se / eta
    return t_hat, t_se


def cross_check(t_primary: float, se_primary: float,
                t_secondary: float, se_secondary: float,
                tolerance_sigma: float = 3.0) -> bool:
    """True iff the two transmission estimates agree within tolerance.

    Disagreement is the protocol's tamper alarm: the block (and session)
    must be aborted when this returns False.
    """
    combined = math.sqrt(se_primary ** 2 + se_secondary ** 2)
    if combined == 0.0:
        return t_primary == t_secondary
    return abs(t_primary - t_secondary) <= tolerance_sigma * combined


def lo_level_ok(lo_level: float, nominal: float = 1.0, tolerance: float = 0.05) -> bool:
    """Local-oscillator monitoring: reject blocks whose LO level drifted.

    A tampered LO would skew the shot-noise normalization, so any deviation
    beyond the tolerance band raises the alarm.
    """
    return abs(lo_level - nominal) <= tolerance * nominal
