"""Complex geometric optics for one-dimensional symmetric hyperbolic systems."""
from .errors import CGOError
from .estimator import CGOApproximation
from .models import REGISTRY, get_model
from .phase import build_phases
from .system import SystemModel, eig_decompose, validate_system

__version__ = "0.1.0"

__all__ = ["CGOApproximation", "CGOError", "REGISTRY", "SystemModel", "build_phases", "eig_decompose",
           "get_model", "validate_system"]
