"""commutatorlab: discretize i[f(P), g(Q)] two ways and check its positivity."""

from ._backend import backend_name
from .funcspace import AtomicMeasure, Density, KatoFunction, SampledFunction
from .grid import GridSpec

__version__ = "0.1.0"

__all__ = [
    "AtomicMeasure",
    "Density",
    "GridSpec",
    "KatoFunction",
    "SampledFunction",
    "backend_name",
]
