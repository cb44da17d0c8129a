"""Entangled coherent states of quantum-dot excitons in three coupled cavities."""
from .cat_dynamics import CatStateSpec, CoherenceModel
from .propagator import SystemParams, mode_coefficients
from .qubit_witness import Target

__version__ = "0.1.0"

__all__ = ["CatStateSpec", "CoherenceModel", "SystemParams", "Target", "mode_coefficients", "__version__"]
