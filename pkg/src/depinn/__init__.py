"""Depinning transitions of Frenkel-Kontorova type chains.

Library for computing depinning forces, equilibria, sliding states,
discommensurations and the associated twist-map geometry of
one-dimensional chains with a generating function ``h(x, x')``.
"""

from .errors import DepinnError, ModelError, NumericalError
from .model import (Bistable, DoubleWell, FunctionH, GeneratingFunction, Mane, StandardFK,
                    TiltedEnergy, make_builtin, modify_band, reversed_h, verify_properties)
from .configs import PeriodicConfiguration, WindowConfiguration, RotationSymbol

__version__ = "0.1.0"

__all__ = [
    "DepinnError", "ModelError", "NumericalError",
    "Bistable", "DoubleWell", "FunctionH", "GeneratingFunction", "Mane", "StandardFK",
    "TiltedEnergy", "make_builtin", "modify_band", "reversed_h", "verify_properties",
    "PeriodicConfiguration", "WindowConfiguration", "RotationSymbol",
]
