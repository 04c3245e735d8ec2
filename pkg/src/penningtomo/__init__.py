"""Spin-cyclotron state tomography of a trapped electron by phase-swept displacement."""

from .config import TomographyConfig, asymmetric_config, symmetric_config
from .fock import FockVector, assoc_laguerre, coherent_amplitudes, displacement_element
from .states import EntangledState, SpinRotation, apply_spin_rotation, build_entangled_state
from .tomography import ReconstructionError, reconstruct

__version__ = "0.1.0"
