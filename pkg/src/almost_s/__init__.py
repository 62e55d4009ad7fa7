"""Curvature, structure-identity and Ricci-soliton checks for almost S-manifolds."""
from ._core import BACKEND
from .chart import Chart, Field, Sampler
from .structure import AlmostSStructure, build_structure

__version__ = "0.1.0"

__all__ = ["AlmostSStructure", "BACKEND", "Chart", "Field", "Sampler", "__version__", "build_structure"]
