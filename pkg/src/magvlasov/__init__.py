"""Linear magnetized Vlasov and Vlasov-Fokker-Planck mode dynamics."""
from . import _backend
from .model import ConfigError, Equilibrium, InitialData, ModeContext, ModeProfile, PlasmaParams

__version__ = "0.1.0"
BACKEND = _backend.NAME

__all__ = [
    "BACKEND",
    "ConfigError",
    "Equilibrium",
    "InitialData",
    "ModeContext",
    "ModeProfile",
    "PlasmaParams",
]
