"""Star products on the ax+b group: flat Weyl core, transported and kernel
products, the bi-Laplacian oscillatory engine and the deformation of
algebras with an ax+b action."""
from .flatcore import GridFn, GridSpec, gaussian
from .geometry import Point
from .starprod import CalibrationRecord, DeformParams
from .transforms import MultiplierSpec

__version__ = "0.1.0"

__all__ = ["GridFn", "GridSpec", "gaussian", "Point", "CalibrationRecord", "DeformParams",
           "MultiplierSpec", "__version__"]
