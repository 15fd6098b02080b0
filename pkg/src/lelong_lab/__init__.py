"""Generalized Lelong numbers of currents along a submanifold, computed in a
local trivial-bundle model C^(k-l) x C^l."""

from .errors import LabError

__version__ = "0.1.0"

__all__ = ["LabError", "__version__"]
