"""Multilevel reverse reconciliation: quantizer, LDPC codes, outer code, decoder."""

from .quantizer import (
    LikelihoodModel,
    QuantizerConfig,
    design_quantizer,
    level_profiles,
    quantized_mutual_info,
    quantizer_entropy,
)
from .ldpc import LdpcCode, audit_code, build_ldpc, load_code, save_code
from .bch import OuterCode
from .recon import (
    MultilevelSpec,
    SyndromeSet,
    DecodeResult,
    decode_multilevel,
    efficiency_beta,
    encode_syndromes,
)

__all__ = [
    "LikelihoodModel", "QuantizerConfig", "design_quantizer", "level_profiles",
    "quantized_mutual_info", "quantizer_entropy",
    "LdpcCode", "build_ldpc", "save_code", "load_code", "audit_code",
    "OuterCode",
    "MultilevelSpec", "SyndromeSet", "DecodeResult",
    "encode_syndromes", "decode_multilevel", "efficiency_beta",
]
