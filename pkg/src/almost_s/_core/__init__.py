"""Curvature contraction kernels.

``curvature_arrays(g, ginv, dg, d2g)`` turns metric values and their first
and second partials (batched over points) into Christoffel symbols, the
Riemann tensor, Ricci tensor and scalar curvature.  A compiled Cython
implementation is used when the extension was built; otherwise the numpy
fallback is selected.  Setting ``ALMOST_S_PURE_PYTHON=1`` forces the
fallback.
"""
import os

from . import _numpy_kernels

python_curvature_arrays = _numpy_kernels.curvature_arrays

try:
    from ._ckernels import curvature_arrays as compiled_curvature_arrays
except ImportError:  # extension not built
    compiled_curvature_arrays = None

if compiled_curvature_arrays is not None and not os.environ.get("ALMOST_S_PURE_PYTHON"):
    curvature_arrays = compiled_curvature_arrays
    BACKEND = "cython"
else:
    curvature_arrays = python_curvature_arrays
    BACKEND = "python"

__all__ = [
    "BACKEND",
    "curvature_arrays",
    "compiled_curvature_arrays",
    "python_curvature_arrays",
]
