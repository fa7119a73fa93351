"""Surface-code simulation under mixed coherent/incoherent bit-flip noise."""

__version__ = "0.1.0"

from .channel import ErrorChannelParams, bond_couplings, vectorized_couplings
from .lattice import build_layout, logical_class, reference_string, syndrome_of
from .metrics import (
    coherent_information,
    entanglement_statistics,
    logical_coherence,
    logical_error_rate,
    relative_entropy,
)
from .mwpm import decode, mwpm_error_rate
from .sampler import sample_batch, sample_eta
from .transfer import ZMatrix, build_gate_plan, contract, z_matrix

__all__ = [
    "__version__",
    "ErrorChannelParams",
    "bond_couplings",
    "vectorized_couplings",
    "build_layout",
    "syndrome_of",
    "reference_string",
    "logical_class",
    "build_gate_plan",
    "contract",
    "z_matrix",
    "ZMatrix",
    "sample_eta",
    "sample_batch",
    "decode",
    "mwpm_error_rate",
    "logical_error_rate",
    "relative_entropy",
    "coherent_information",
    "logical_coherence",
    "entanglement_statistics",
]
