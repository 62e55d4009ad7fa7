"""Vertical warping of a metric along the leaves and leafwise curvature."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .chart import Chart, Field, Sampler, constant_field
from .geometry import curvature, inner, orthonormal_frame, ricci_range
from .jet import Jet, einsum, stack
from .structure import AlmostSStructure, StructureProbe

BASIC_TOLERANCE = 1e-8
SECOND_FUNDAMENTAL_TOLERANCE = 1e-8


class NonBasicWarpError(ValueError):
    """The warp function varies along the leaves."""

    def __init__(self, defect, tol):
        super().__init__(f"warp function is not basic: max |xi_i w| = {defect:.6e} >= {tol:g}")
        self.defect = defect
        self.tolerance = tol


@dataclass(frozen=True)
class VerticalSplitting:
    """Vertical frame fields spanning the leaves, on a chart."""

    chart: Chart
    vertical: tuple

    def __post_init__(self):
        vertical = tuple(self.vertical)
        if not vertical:
            raise ValueError("need at least one vertical field")
        for v in vertical:
            if v.kind != "vector" or v.dim != self.chart.dim:
                raise ValueError(f"vertical field {v.name!r} is not a vector field on the chart")
        object.__setattr__(self, "vertical", vertical)

    @classmethod
    def from_structure(cls, s: AlmostSStructure):
        return cls(s.chart, tuple(s.xi))

    @property
    def dim(self):
        return self.chart.dim

    def projector_jets(self, gj: Jet, pts):
        """``(P_v, P_h)`` jets, g-orthogonal with respect to the metric jet ``gj``."""
        xi = stack([v.jet(pts, gj.order) for v in self.vertical])  # [a, i]
        gram = einsum("ai,aj->ij", xi, einsum("ab,bj->aj", gj, xi))
        xg = einsum("ai,ab->ib", xi, gj)
        pv = einsum("ai,ib->ab", xi, einsum("ij,jb->ib", gram.inv(), xg))
        eye = np.broadcast_to(np.eye(self.dim), pv.shape).copy()
        ph = Jet.constant(eye, self.dim, pv.order) - pv
        return pv, ph

    def projectors(self, g: Field, pts):
        pv, ph = self.projector_jets(g.jet(pts, 0), pts)
        return pv.value, ph.value


def _as_splitting(obj):
    if isinstance(obj, VerticalSplitting):
        return obj
    if isinstance(obj, AlmostSStructure):
        return VerticalSplitting.from_structure(obj)
    raise TypeError("expected a VerticalSplitting or an AlmostSStructure")


def _as_scalar(w, dim):
    if isinstance(w, Field):
        if w.kind != "scalar":
            raise ValueError("warp function must be a scalar field")
        return w
    return constant_field("scalar", float(w), dim, name=repr(float(w)))


def basic_defect(f, s, sampler: Sampler | None = None):
    """``max |xi_i f|`` over the samples and the vertical fields."""
    split = _as_splitting(s)
    f = _as_scalar(f, split.dim)
    pts = (sampler or Sampler()).points(split.chart)
    df = f.jet(pts, 1).parts[1]
    worst = 0.0
    for v in split.vertical:
        worst = max(worst, float(np.max(np.abs(np.einsum("...a,...a->...", df, v.eval(pts))))))
    return worst


def vertical_warp(g: Field, splitting, w, sampler: Sampler | None = None, tol=BASIC_TOLERANCE):
    """``e^{2w} g(P_v., P_v.) + g(P_h., P_h.)`` for a basic function ``w``."""
    split = _as_splitting(splitting)
    w = _as_scalar(w, split.dim)
    defect = basic_defect(w, split, sampler)
    if not defect < tol:
        raise NonBasicWarpError(defect, tol)

    def fn(x):
        pts = np.stack([c.value for c in x], axis=-1)
        gj = g._raw(x)
        pv, ph = split.projector_jets(gj, pts)
        vert = einsum("ka,kb->ab", pv, einsum("kl,lb->kb", gj, pv))
        horiz = einsum("ka,kb->ab", ph, einsum("kl,lb->kb", gj, ph))
        scale = (w._raw(x) * 2.0).exp()
        return einsum(",ab->ab", scale, vert) + horiz

    return Field("metric", g.dim, fn, name=f"warp({g.name},{w.name})")


def canonical_variation(g: Field, splitting, t, sampler: Sampler | None = None):
    """Vertical block scaled by ``t^2``."""
    if not t > 0:
        raise ValueError(f"canonical variation needs t > 0, got {t}")
    return vertical_warp(g, splitting, math.log(t), sampler)


def ricci_range_table(g: Field, splitting, ts, sampler: Sampler | None = None):
    """``[(t, min, max)]`` of ``Ric(u,u)/|u|^2`` for the canonical variation."""
    split = _as_splitting(splitting)
    pts = (sampler or Sampler()).points(split.chart)
    return [(float(t), *ricci_range(canonical_variation(g, split, t, sampler), pts)) for t in ts]


@dataclass
class LeafCurvatureReport:
    pairs: list
    sectional: np.ndarray  # (N, n_pairs)
    leaf_ricci: np.ndarray  # (N, p): Ric_F(xi_i, xi_i) / |xi_i|^2
    second_fundamental: np.ndarray  # (N,)
    tolerance: float = SECOND_FUNDAMENTAL_TOLERANCE
    notes: dict = field(default_factory=dict)

    @property
    def trusted(self):
        """Leaf-intrinsic values equal the ambient ones only for totally geodesic leaves."""
        return bool(np.max(self.second_fundamental, initial=0.0) < self.tolerance)

    def summary(self):
        return {
            "sectional_max_abs": float(np.max(np.abs(self.sectional), initial=0.0)),
            "leaf_ricci_max_abs": float(np.max(np.abs(self.leaf_ricci), initial=0.0)),
            "second_fundamental_max": float(np.max(self.second_fundamental, initial=0.0)),
            "trusted": self.trusted,
        }


def leaf_curvature_report(s: AlmostSStructure, sampler: Sampler | None = None, tol=SECOND_FUNDAMENTAL_TOLERANCE):
    sampler = sampler or Sampler()
    pts = sampler.points(s.chart)
    pr = StructureProbe(s, pts, order=2)
    g, xi = pr.g, pr.xi
    p = s.p

    # II(xi_i, xi_j) = P_h nabla_{xi_i} xi_j
    nab = np.einsum("...jkz,...iz->...ijk", pr.nabla_xi, xi)
    second = np.einsum("...ab,...ijb->...ija", pr.horizontal_projector, nab)
    ii_norm = np.sqrt(np.maximum(np.einsum("...ija,...ab,...ijb->...", second, g, second), 0.0))

    riem = curvature(s.g, pts).riemann
    pairs = list(itertools.combinations(range(p), 2))
    sec = np.zeros((pts.shape[0], len(pairs)))
    for col, (i, j) in enumerate(pairs):
        u, v = xi[:, i], xi[:, j]
        ruvv = np.einsum("...lkab,...k,...a,...b->...l", riem, v, u, v)
        area = inner(g, u, u) * inner(g, v, v) - inner(g, u, v) ** 2
        sec[:, col] = inner(g, ruvv, u) / area

    vert = orthonormal_frame(g, seeds=xi)[:, :, :p]
    ric_f = np.zeros((pts.shape[0], p))
    for i in range(p):
        u = xi[:, i]
        ruu = np.einsum("...lkab,...ax,...k,...b->...xl", riem, vert, u, u)  # R(V_x, u) u
        ric_f[:, i] = np.einsum("...xl,...lm,...mx->...", ruu, g, vert) / inner(g, u, u)

    notes = {
        "second_fundamental": "max over i, j of |P_h nabla_{xi_i} xi_j|_g",
        "leaf_ricci": "ambient curvature restricted to the leaf; valid when the leaves are totally geodesic",
    }
    rep = LeafCurvatureReport(
        [(i + 1, j + 1) for i, j in pairs], sec, ric_f, ii_norm.reshape(pts.shape[0], -1).max(axis=1), tol, notes
    )
    if not rep.trusted:
        rep.notes["warning"] = "second fundamental form above tolerance: leaf Ricci values untrusted"
    return rep


__all__ = [
    "LeafCurvatureReport",
    "NonBasicWarpError",
    "VerticalSplitting",
    "basic_defect",
    "canonical_variation",
    "leaf_curvature_report",
    "ricci_range",
    "ricci_range_table",
    "vertical_warp",
]
