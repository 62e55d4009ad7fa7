"""Levi-Civita geometry of a metric field on a chart.

Two layers live here.  Jet-level helpers (suffix ``_jet``) take and return
:class:`~almost_s.jet.Jet` objects and are exact to the order carried by
their inputs; they are what the structure and soliton code builds on.  The
value-level functions take fields plus points (one point of shape ``(m,)``
or a batch ``(N, m)``) and return plain arrays.

Conventions
-----------
* ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``, stored
  as ``riemann[l, k, i, j] = R^l_kij`` with ``R(d_i, d_j) d_k = R^l_kij d_l``.
* ``Ric(X, Y) = tr(Z -> R(Z, X)Y)``, so round spheres have positive Ricci.
* ``Delta f = -tr_g Hess f`` (non-negative spectrum).
* ``nabla* nabla V = -tr_g nabla^2 V``.
* Divergence of an endomorphism: ``(Div T)(X) = sum_a <(nabla_{E_a} T) X, E_a>``.
* Exterior derivative of a one-form:
  ``d w(X, Y) = 1/2 (X w(Y) - Y w(X) - w([X, Y]))``; two-forms carry 1/3.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _core
from .chart import DegenerateMetricError, Field, as_batch
from .jet import Jet, einsum

ONE_FORM_D_FACTOR = 0.5
TWO_FORM_D_FACTOR = 1.0 / 3.0

CONVENTIONS = {
    "curvature": "R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z; Ric(X,Y) = tr(Z -> R(Z,X)Y)",
    "d_eta_factor": "d w(X,Y) = 1/2 (X w(Y) - Y w(X) - w([X,Y])); two-forms 1/3",
    "divergence": "(Div T)(X) = sum_a <(nabla_{E_a} T) X, E_a>",
    "laplacian_sign": "Delta f = -tr_g Hess f",
    "rough_laplacian": "nabla* nabla V = -sum_a (nabla_{E_a} nabla_{E_a} V - nabla_{nabla_{E_a} E_a} V)",
    "frame": "Gram-Schmidt on (xi_1..xi_p, d_1..d_m) when a structure is present, else on (d_1..d_m)",
}

_MIN_EIGENVALUE = 1e-12


@dataclass(frozen=True)
class CurvatureData:
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray


# ----------------------------------------------------------------------------
# metric helpers


def check_metric(gv):
    """Raise :class:`DegenerateMetricError` unless every matrix is SPD."""
    gv = np.asarray(gv, dtype=float)
    if not np.allclose(gv, np.swapaxes(gv, -1, -2), rtol=0, atol=1e-12 * max(1.0, np.abs(gv).max())):
        raise DegenerateMetricError("metric is not symmetric")
    eig = np.linalg.eigvalsh(gv)
    if np.any(~np.isfinite(eig)) or eig.min() <= _MIN_EIGENVALUE:
        raise DegenerateMetricError(f"metric not positive definite (smallest eigenvalue {eig.min():.3e})")
    return eig


def metric_inverse(gv):
    check_metric(gv)
    return np.linalg.inv(gv)


def inner(gv, u, v):
    return np.einsum("...ij,...i,...j->...", gv, u, v)


def norm(gv, u):
    return np.sqrt(np.maximum(inner(gv, u, u), 0.0))


def orthonormal_frame(gv, seeds=None, tol=1e-10):
    """g-orthonormal frames by Gram-Schmidt.

    ``gv`` has shape ``(N, m, m)``; ``seeds`` optionally ``(N, s, m)`` vectors
    placed first (Reeb fields).  Returns ``E`` of shape ``(N, m, m)`` whose
    columns ``E[:, :, a]`` are the frame vectors.
    """
    gv = np.asarray(gv, dtype=float)
    n_pts, m = gv.shape[0], gv.shape[-1]
    frames = np.empty((n_pts, m, m))
    eye = np.eye(m)
    for n in range(n_pts):
        g = gv[n]
        cands = list(seeds[n]) if seeds is not None else []
        cands += list(eye)
        basis = []
        for c in cands:
            v = np.array(c, dtype=float)
            for e in basis:
                v = v - (e @ g @ v) * e
            for e in basis:  # second pass for stability
                v = v - (e @ g @ v) * e
            nv = np.sqrt(v @ g @ v)
            if nv > tol:
                basis.append(v / nv)
            if len(basis) == m:
                break
        if len(basis) != m:
            raise DegenerateMetricError("could not complete an orthonormal frame")
        frames[n] = np.stack(basis, axis=1)
    return frames


# ----------------------------------------------------------------------------
# jet-level operations


def christoffel_jet(gj, ginvj=None):
    """``Gamma[k, i, j]`` as a jet one order below ``gj``."""
    if ginvj is None:
        ginvj = gj.inv()
    dg = gj.grad()
    low = (dg.transpose("jli->lij") + dg.transpose("ilj->lij") - dg.transpose("ijl->lij")) * 0.5
    return einsum("kl,lij->kij", ginvj, low)


def riemann_jet(gammaj):
    dgam = gammaj.grad()  # [l, j, k, i] = d_i Gamma^l_jk
    return (
        dgam.transpose("ljki->lkij")
        - dgam.transpose("likj->lkij")
        + einsum("lia,ajk->lkij", gammaj, gammaj)
        - einsum("lja,aik->lkij", gammaj, gammaj)
    )


def ricci_from_riemann(rj):
    return einsum("ikij->jk", rj)


def nabla_jet(tj, gammaj, types):
    """Covariant derivative of a tensor jet.

    ``types`` gives the variance of each component axis (``"u"`` upper,
    ``"l"`` lower).  The differentiation direction is appended as the last
    component axis, so for a vector ``out[k, z] = (nabla_{d_z} V)^k``.
    """
    rank = len(types)
    letters = "abcdefgh"[:rank]
    out = tj.grad()
    order = min(out.order, gammaj.order)
    out = out.truncate(order)
    t = tj.truncate(order)
    for pos, kind in enumerate(types):
        src = letters[:pos] + "y" + letters[pos + 1:]
        if kind == "u":
            term = einsum(f"{letters[pos]}zy,{src}->{letters}z", gammaj, t)
            out = out + term
        elif kind == "l":
            term = einsum(f"yz{letters[pos]},{src}->{letters}z", gammaj, t)
            out = out - term
        else:
            raise ValueError(f"bad variance {kind!r}")
    return out


def lie_bracket_jet(xj, yj):
    dx, dy = xj.grad(), yj.grad()
    return einsum("k,ak->a", xj, dy) - einsum("k,ak->a", yj, dx)


def lie_derivative_jet(xj, tj, kind):
    """``L_X T`` for ``kind`` in scalar / vector / one-form / metric / two-form / endomorphism."""
    dx = xj.grad()  # [k, i] = d_i X^k
    dt = tj.grad()
    if kind == "scalar":
        return einsum("k,k->", xj, dt)
    if kind == "vector":
        return lie_bracket_jet(xj, tj)
    if kind == "one-form":
        return einsum("k,ik->i", xj, dt) + einsum("k,ki->i", tj, dx)
    if kind in ("metric", "two-form"):
        return (
            einsum("k,ijk->ij", xj, dt)
            + einsum("kj,ki->ij", tj, dx)
            + einsum("ik,kj->ij", tj, dx)
        )
    if kind == "endomorphism":
        return (
            einsum("k,abk->ab", xj, dt)
            - einsum("kb,ak->ab", tj, dx)
            + einsum("ak,kb->ab", tj, dx)
        )
    raise ValueError(f"Lie derivative not defined for kind {kind!r}")


def exterior_derivative_jet(wj, kind):
    d = wj.grad()
    if kind == "one-form":
        # d[j, i] = d_i w_j
        return (d.transpose("ji->ij") - d) * ONE_FORM_D_FACTOR
    if kind == "two-form":
        # d[j, k, i] = d_i w_jk
        return (d.transpose("jki->ijk") + d.transpose("kij->ijk") + d) * TWO_FORM_D_FACTOR
    if kind == "scalar":
        return d
    raise ValueError(f"exterior derivative not defined for kind {kind!r}")


def hessian_jet(fj, gammaj):
    d = fj.grad()
    dd = d.grad()
    order = min(dd.order, gammaj.order)
    return dd.truncate(order) - einsum("kij,k->ij", gammaj.truncate(order), d.truncate(order))


def wedge(alpha, beta):
    """``(a ^ b)(X, Y) = 1/2 (a(X) b(Y) - a(Y) b(X))`` on component arrays."""
    a, b = np.asarray(alpha, float), np.asarray(beta, float)
    return 0.5 * (np.einsum("...i,...j->...ij", a, b) - np.einsum("...j,...i->...ij", a, b))


# ----------------------------------------------------------------------------
# cached per-point geometry


class GeometryJets:
    """Lazily computed jets of the Levi-Civita data of ``g`` at ``pts``.

    ``order`` is the jet order of the metric; Christoffel symbols carry one
    order less, curvature two less.
    """

    def __init__(self, g, pts, order=3):
        self.g_field = g
        self.pts = pts
        self.order = order
        self._cache = {}

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def metric(self):
        def build():
            gj = self.g_field.jet(self.pts, self.order)
            check_metric(gj.value)
            return gj
        return self._get("metric", build)

    @property
    def inverse(self):
        return self._get("inverse", lambda: self.metric.inv())

    @property
    def christoffel(self):
        return self._get("christoffel", lambda: christoffel_jet(self.metric, self.inverse))

    @property
    def riemann(self):
        return self._get("riemann", lambda: riemann_jet(self.christoffel))

    @property
    def ricci(self):
        return self._get("ricci", lambda: ricci_from_riemann(self.riemann))

    @property
    def scalar(self):
        ricci = self.ricci
        return self._get("scalar", lambda: einsum("jk,jk->", self.inverse.truncate(ricci.order), ricci))

    @property
    def ricci_operator(self):
        ricci = self.ricci
        return self._get("ricci_op", lambda: einsum("ak,kb->ab", self.inverse.truncate(ricci.order), ricci))


@lru_cache(maxsize=32)
def _geometry_cached(g, key, shape, order):
    pts = np.frombuffer(key, dtype=float).reshape(shape)
    return GeometryJets(g, pts, order)


def geometry_jets(g: Field, pts, order=3):
    pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=float)
    return _geometry_cached(g, pts.tobytes(), pts.shape, int(order))


# ----------------------------------------------------------------------------
# value-level API


def _unbatch(single, *arrays):
    if not single:
        return arrays if len(arrays) > 1 else arrays[0]
    out = tuple(a[0] for a in arrays)
    return out if len(out) > 1 else out[0]


def christoffel(g: Field, pts):
    """Christoffel symbols ``Gamma[k, i, j]`` of the Levi-Civita connection."""
    pts, single = as_batch(pts, g.dim)
    gj = g.jet(pts, 1)
    ginv = metric_inverse(gj.value)
    dg = gj.parts[1]
    low = 0.5 * (
        np.einsum("...jli->...lij", dg) + np.einsum("...ilj->...lij", dg) - np.einsum("...ijl->...lij", dg)
    )
    return _unbatch(single, np.einsum("...kl,...lij->...kij", ginv, low))


def curvature(g: Field, pts, backend=None):
    """Curvature at the points through the contraction kernel."""
    pts, single = as_batch(pts, g.dim)
    gj = g.jet(pts, 2)
    ginv = metric_inverse(gj.value)
    kernel = _core.curvature_arrays
    if backend == "python":
        kernel = _core.python_curvature_arrays
    elif backend == "cython":
        if _core.compiled_curvature_arrays is None:
            raise RuntimeError("compiled kernel not available")
        kernel = _core.compiled_curvature_arrays
    gamma, riemann, ricci, scalar = kernel(gj.value, ginv, gj.parts[1], gj.parts[2])
    if single:
        return CurvatureData(gamma[0], riemann[0], ricci[0], scalar[0])
    return CurvatureData(gamma, riemann, ricci, scalar)


def sectional(g: Field, pts, u, v):
    """Sectional curvature ``<R(u,v)v, u> / (|u|^2 |v|^2 - <u,v>^2)``."""
    pts, single = as_batch(pts, g.dim)
    gv = g.eval(pts)
    u = np.broadcast_to(np.asarray(u, float), pts.shape)
    v = np.broadcast_to(np.asarray(v, float), pts.shape)
    area = inner(gv, u, u) * inner(gv, v, v) - inner(gv, u, v) ** 2
    scale = inner(gv, u, u) * inner(gv, v, v)
    if np.any(area <= 1e-12 * np.maximum(scale, 1e-300)):
        raise ValueError("degenerate plane: u and v are linearly dependent")
    r = curvature(g, pts).riemann
    ruvv = np.einsum("...lkij,...k,...i,...j->...l", r, v, u, v)
    return _unbatch(single, inner(gv, ruvv, u) / area)


def lie_derivative(x: Field, t: Field, pts):
    """Components of ``L_X T`` (metric, endomorphism, one-form, vector or scalar ``T``)."""
    pts, single = as_batch(pts, x.dim)
    out = lie_derivative_jet(x.jet(pts, 1), t.jet(pts, 1), t.kind)
    return _unbatch(single, out.value)


_VARIANCE = {"vector": "u", "one-form": "l", "endomorphism": "ul", "metric": "ll", "two-form": "ll", "scalar": ""}


def covariant_derivative(t: Field, direction, g: Field, pts):
    """``nabla_direction T``; ``direction`` is a constant vector or a vector field."""
    pts, single = as_batch(pts, g.dim)
    geo = geometry_jets(g, pts, 2)
    nab = nabla_jet(t.jet(pts, 1), geo.christoffel.truncate(0), _VARIANCE[t.kind]).value
    if isinstance(direction, Field):
        dv = direction.eval(pts)
    else:
        dv = np.broadcast_to(np.asarray(direction, float), pts.shape)
    return _unbatch(single, np.einsum("...z,...z->...", nab, dv[(Ellipsis,) + (None,) * (nab.ndim - 2) + (slice(None),)]))


def hessian_laplacian(f: Field, g: Field, pts):
    """``(Hess f, Delta f)`` with ``Delta f = -tr_g Hess f``."""
    pts, single = as_batch(pts, g.dim)
    geo = geometry_jets(g, pts, 2)
    hess = hessian_jet(f.jet(pts, 2), geo.christoffel.truncate(0)).value
    lap = -np.einsum("...ij,...ij->...", metric_inverse(geo.metric.value), hess)
    return _unbatch(single, hess, lap)


def _frame_projector(gv, frame):
    """``sum_a E_a (x) E_a`` i.e. the inverse metric when the frame is orthonormal."""
    if frame is None:
        frame = orthonormal_frame(gv)
    return np.einsum("...ia,...ja->...ij", frame, frame)


def divergence(t: Field, g: Field, pts, frame=None):
    """Divergence of a vector field (scalar) or endomorphism field (one-form)."""
    pts, single = as_batch(pts, g.dim)
    geo = geometry_jets(g, pts, 2)
    gv = geo.metric.value
    proj = _frame_projector(gv, frame)
    nab = nabla_jet(t.jet(pts, 1), geo.christoffel.truncate(0), _VARIANCE[t.kind]).value
    if t.kind == "vector":
        out = np.einsum("...kl,...kz,...zl->...", gv, nab, proj)
    elif t.kind == "endomorphism":
        out = np.einsum("...kl,...kxz,...zl->...x", gv, nab, proj)
    else:
        raise ValueError(f"divergence not defined for kind {t.kind!r}")
    return _unbatch(single, out)


def exterior_derivative(w: Field, pts):
    pts, single = as_batch(pts, w.dim)
    return _unbatch(single, exterior_derivative_jet(w.jet(pts, 1), w.kind).value)


def rough_laplacian_jet(vj, gammaj, gv, frame=None):
    """``nabla* nabla V`` values from a vector jet of order >= 2."""
    nab = nabla_jet(vj, gammaj, "u")
    nab2 = nabla_jet(nab, gammaj, "ul").value  # [k, y, z] = nabla^2_{z, y} V^k
    proj = _frame_projector(gv, frame)
    return -np.einsum("...kyz,...yz->...k", nab2, proj)


def rough_laplacian_vector(v: Field, g: Field, pts, frame=None):
    pts, single = as_batch(pts, g.dim)
    geo = geometry_jets(g, pts, 3)
    out = rough_laplacian_jet(v.jet(pts, 2), geo.christoffel.truncate(1), geo.metric.value, frame)
    return _unbatch(single, out)


def ricci_range(g: Field, pts):
    """Global (min, max) of ``Ric(u,u)/|u|^2`` over the points."""
    pts, _ = as_batch(pts, g.dim)
    curv = curvature(g, pts)
    ev = generalized_eigenvalues(curv.ricci, g.eval(pts))
    return float(ev.min()), float(ev.max())


def generalized_eigenvalues(a, gv):
    """Eigenvalues of the symmetric form ``a`` relative to the metric ``gv``."""
    chol = np.linalg.cholesky(gv)
    linv = np.linalg.inv(chol)
    sym = np.einsum("...ij,...jk,...lk->...il", linv, a, linv)
    return np.linalg.eigvalsh(0.5 * (sym + np.swapaxes(sym, -1, -2)))
