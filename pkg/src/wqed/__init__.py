"""Single-photon transport through atom chains coupled to one-dimensional waveguides."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0.0.0"

from .core import (Atom, AtomChain, ChainSpec, ConfigError, WaveguideConfig, WaveguideKind,
                   build_periodic_chain, validate_chain)
from .chiral import (avg_tau_squared, avg_transmission_chiral, chiral_transmission,
                     inverse_localization_length_chiral, localization_length_chiral)
from .bidirectional import chain_scattering, solve_amplitudes_dense, transfer_matrix
from .bands import dispersion_from_matrix, dispersion_general, scan_bands
from .disorder import (DisorderSpec, DisorderTarget, localization_length_mc, localization_sweep,
                       mc_average, sample_chain)

__all__ = [
    "Atom", "AtomChain", "ChainSpec", "ConfigError", "WaveguideConfig", "WaveguideKind",
    "build_periodic_chain", "validate_chain", "avg_tau_squared", "avg_transmission_chiral",
    "chiral_transmission", "inverse_localization_length_chiral", "localization_length_chiral",
    "chain_scattering", "solve_amplitudes_dense", "transfer_matrix", "dispersion_from_matrix",
    "dispersion_general", "scan_bands", "DisorderSpec", "DisorderTarget", "localization_length_mc",
    "localization_sweep", "mc_average", "sample_chain",
]
