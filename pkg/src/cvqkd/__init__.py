"""Classical post-processing for reverse-reconciliation coherent-state CV-QKD.

Submodules:

* ``rates``      -- Shannon/Holevo secret-rate formulas and sweeps
* ``simkit``     -- statistical simulation of modulation, channel, homodyne
* ``estimator``  -- channel-parameter recovery and tamper alarms
* ``mlc``        -- quantizer + multilevel LDPC reconciliation + outer code
* ``privamp``    -- NTT / Galois-field composite hashing
* ``session``    -- Alice/Bob key-distillation state machines over a byte stream
* ``cli``        -- the ``qkd`` command-line tool
"""

from . import estimator, mlc, privamp, rates, session, simkit
from .errors import (
    AuthenticationError,
    CalibrationError,
    CodeConstructionError,
    CvqkdError,
    DecodeFailure,
    EstimationError,
    ModelError,
    NoKeyAvailable,
    NumericDomainError,
    ProtocolError,
)

__version__ = "0.1.0"

__all__ = [
    "rates", "simkit", "estimator", "mlc", "privamp", "session",
    "CvqkdError", "ModelError", "NumericDomainError", "CalibrationError",
    "EstimationError", "CodeConstructionError", "DecodeFailure",
    "NoKeyAvailable", "ProtocolError", "AuthenticationError",
]
