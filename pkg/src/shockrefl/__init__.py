"""Regular shock reflection off a wedge: local states and the subsonic free boundary problem."""

from shockrefl.thermo import GasParams

__version__ = "0.1.0"

__all__ = ["GasParams", "__version__"]
