"""Almost S-structures and the tensors derived from them."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .chart import Chart, Field, as_batch
from .geometry import (
    exterior_derivative_jet,
    geometry_jets,
    lie_bracket_jet,
    lie_derivative_jet,
    nabla_jet,
    norm,
    orthonormal_frame,
)
from .jet import einsum

# numeric rank thresholds for phi (singular values of g^{1/2} phi g^{-1/2})
RANK_ZERO_THRESHOLD = 1e-9
RANK_NONZERO_THRESHOLD = 0.1


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AlmostSStructure:
    """The tuple ``(chart, g, phi, xi_1..xi_p, eta^1..eta^p)`` with ``dim = 2n + p``.

    ``eta`` is stored independently of ``g`` and ``xi`` so that broken
    axioms remain detectable.
    """

    chart: Chart
    g: Field
    phi: Field
    xi: tuple
    eta: tuple
    n: int
    p: int
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.chart.dim

    def descriptor(self):
        return {"name": self.name, "n": self.n, "p": self.p, "dim": self.dim, **self.params}


def build_structure(chart, g, phi, xi, eta, n, p, name="custom", params=None):
    """Assemble a structure after checking shapes only (axioms are not validated)."""
    xi, eta = tuple(xi), tuple(eta)
    if n < 0 or p < 1:
        raise DimensionMismatchError(f"need n >= 0 and p >= 1, got n={n}, p={p}")
    if chart.dim != 2 * n + p:
        raise DimensionMismatchError(f"chart dimension {chart.dim} != 2n+p = {2 * n + p}")
    if len(xi) != p or len(eta) != p:
        raise DimensionMismatchError(f"expected {p} Reeb fields and contact forms, got {len(xi)} and {len(eta)}")
    expected = [(g, "metric"), (phi, "endomorphism")] + [(x, "vector") for x in xi] + [(e, "one-form") for e in eta]
    for f, kind in expected:
        if f.kind != kind:
            raise DimensionMismatchError(f"field {f.name!r} has kind {f.kind}, expected {kind}")
        if f.dim != chart.dim:
            raise DimensionMismatchError(f"field {f.name!r} has dimension {f.dim}, chart has {chart.dim}")
    return AlmostSStructure(chart, g, phi, xi, eta, int(n), int(p), name, dict(params or {}))


class StructureProbe:
    """Jets of a structure at a fixed batch of points, computed on demand."""

    def __init__(self, s: AlmostSStructure, pts, order=3):
        pts, _ = as_batch(pts, s.dim)
        self.s = s
        self.pts = np.ascontiguousarray(pts)
        self.order = order
        self.geo = geometry_jets(s.g, self.pts, order)

    @property
    def m(self):
        return self.s.dim

    # raw field jets -----------------------------------------------------
    @cached_property
    def phi_jet(self):
        return self.s.phi.jet(self.pts, self.order)

    @cached_property
    def xi_jets(self):
        return [x.jet(self.pts, self.order) for x in self.s.xi]

    @cached_property
    def eta_jets(self):
        return [e.jet(self.pts, self.order) for e in self.s.eta]

    # values --------------------------------------------------------------
    @cached_property
    def g(self):
        return self.geo.metric.value

    @cached_property
    def ginv(self):
        return self.geo.inverse.value

    @cached_property
    def phi(self):
        return self.phi_jet.value

    @cached_property
    def xi(self):
        """``(N, p, m)`` Reeb field values."""
        return np.stack([j.value for j in self.xi_jets], axis=1)

    @cached_property
    def eta(self):
        return np.stack([j.value for j in self.eta_jets], axis=1)

    @cached_property
    def xi_bar(self):
        return self.xi.sum(axis=1)

    @cached_property
    def eta_bar(self):
        return self.eta.sum(axis=1)

    @cached_property
    def frame(self):
        """g-orthonormal frame seeded with the Reeb fields."""
        return orthonormal_frame(self.g, seeds=self.xi)

    @cached_property
    def gamma(self):
        return self.geo.christoffel

    @cached_property
    def ricci(self):
        return self.geo.ricci.value

    # derived jets ----------------------------------------------------------
    @cached_property
    def h_jets(self):
        """``h_i = 1/2 L_{xi_i} phi``."""
        return [lie_derivative_jet(x, self.phi_jet, "endomorphism") * 0.5 for x in self.xi_jets]

    @cached_property
    def h(self):
        return np.stack([j.value for j in self.h_jets], axis=1)

    @cached_property
    def sasaki_jet(self):
        """``F_ab = g(d_a, phi d_b)``."""
        return einsum("ak,kb->ab", self.geo.metric, self.phi_jet)

    @cached_property
    def d_eta(self):
        return np.stack([exterior_derivative_jet(e, "one-form").value for e in self.eta_jets], axis=1)

    @cached_property
    def nabla_xi(self):
        """``(N, p, m, m)`` with ``[i, k, z] = (nabla_{d_z} xi_i)^k``."""
        gam = self.gamma
        return np.stack([nabla_jet(x, gam, "u").value for x in self.xi_jets], axis=1)

    @cached_property
    def nabla_phi(self):
        """``[a, b, z] = ((nabla_{d_z} phi) d_b)^a``."""
        return nabla_jet(self.phi_jet, self.gamma, "ul").value

    @cached_property
    def vertical_projector(self):
        """g-orthogonal projector onto span(xi): ``P = Xi (Xi^T g Xi)^{-1} Xi^T g``."""
        xi = self.xi
        gram = np.einsum("...ia,...ab,...jb->...ij", xi, self.g, xi)
        return np.einsum("...ia,...ij,...jc,...cb->...ab", xi, np.linalg.inv(gram), xi, self.g)

    @cached_property
    def horizontal_projector(self):
        return np.eye(self.m) - self.vertical_projector


def _per_sample(x):
    x = np.asarray(x)
    if x.ndim == 1:
        return np.abs(x)
    return np.abs(x.reshape(x.shape[0], -1)).max(axis=1) if x.shape[1:] and np.prod(x.shape[1:]) else np.zeros(x.shape[0])


def probe(s, pts, order=3):
    return pts if isinstance(pts, StructureProbe) else StructureProbe(s, pts, order)


def phi_singular_values(pr):
    """Singular values of ``g^{1/2} phi g^{-1/2}`` (orthonormal-frame matrix of phi)."""
    chol = np.linalg.cholesky(pr.g)  # g = L L^T
    mat = np.einsum("...ki,...kl,...lj->...ij", chol, pr.phi, np.linalg.inv(np.swapaxes(chol, -1, -2)))
    return np.linalg.svd(mat, compute_uv=False)


AXIOM_NAMES = (
    "unit_xi",
    "eta_metric_dual",
    "phi_square",
    "d_eta",
    "phi_xi",
    "eta_phi",
    "rank_phi",
    "phi_skew",
    "compatibility",
    "phi_cube",
    "xi_commutators",
)


def axiom_residuals(s: AlmostSStructure, pts):
    """Per-sample max-abs residuals of the structure equations and their consequences.

    Returns ``{name: array (N,)}``; never raises on a failing axiom.
    """
    pr = probe(s, pts)
    n_pts, m, p, n = pr.pts.shape[0], pr.m, s.p, s.n
    g, phi, xi, eta = pr.g, pr.phi, pr.xi, pr.eta
    eye = np.eye(m)
    phi2 = phi @ phi
    xi_eta = np.einsum("...ia,...ib->...ab", xi, eta)
    sasaki = pr.sasaki_jet.value
    out = {}
    out["unit_xi"] = _per_sample(norm(g[:, None], xi) - 1.0)
    out["eta_metric_dual"] = _per_sample(eta - np.einsum("...ab,...ib->...ia", g, xi))
    out["phi_square"] = _per_sample(phi2 + eye - xi_eta)
    out["d_eta"] = _per_sample(pr.d_eta - sasaki[:, None])
    out["phi_xi"] = _per_sample(np.einsum("...ab,...ib->...ia", phi, xi))
    out["eta_phi"] = _per_sample(np.einsum("...ia,...ab->...ib", eta, phi))
    sv = np.sort(phi_singular_values(pr), axis=-1)
    rank = (sv > RANK_NONZERO_THRESHOLD).sum(axis=-1)
    out["rank_phi"] = np.abs(rank - 2 * n) + sv[:, :p].max(axis=-1)
    out["phi_skew"] = _per_sample(sasaki + np.swapaxes(sasaki, -1, -2))
    compat = np.einsum("...ka,...kl,...lb->...ab", phi, g, phi) - g + np.einsum("...ia,...ib->...ab", eta, eta)
    out["compatibility"] = _per_sample(compat)
    out["phi_cube"] = _per_sample(phi2 @ phi + phi)
    comm = [
        lie_bracket_jet(pr.xi_jets[i], pr.xi_jets[j]).value
        for i in range(p)
        for j in range(i + 1, p)
    ]
    out["xi_commutators"] = _per_sample(np.stack(comm, axis=1)) if comm else np.zeros(n_pts)
    return out


def sasaki_form(s: AlmostSStructure, pts):
    """``(F, dF)`` component arrays with ``F_ab = g(d_a, phi d_b)``."""
    pr = probe(s, pts)
    fj = pr.sasaki_jet
    return fj.value, exterior_derivative_jet(fj, "two-form").value


def nijenhuis_tensor(pr):
    """``N[k, a, b] = N_phi(d_a, d_b)^k`` from jets of phi."""
    pj = pr.phi_jet
    phi = pj.value
    dphi = pj.parts[1]  # [k, b, j] = d_j phi^k_b
    return (
        np.einsum("...ja,...kbj->...kab", phi, dphi)
        - np.einsum("...jb,...kaj->...kab", phi, dphi)
        + np.einsum("...kj,...jab->...kab", phi, dphi)
        - np.einsum("...kj,...jba->...kab", phi, dphi)
    )


def nijenhuis(s: AlmostSStructure, x: Field, y: Field, pts):
    """``N_phi(X, Y)`` for vector fields via Lie brackets."""
    pr = probe(s, pts)
    order = 1
    pj = pr.phi_jet.truncate(order + 1)
    xj, yj = x.jet(pr.pts, order + 1), y.jet(pr.pts, order + 1)
    phix = einsum("ab,b->a", pj, xj)
    phiy = einsum("ab,b->a", pj, yj)
    phi2 = einsum("ab,bc->ac", pj, pj).value
    phiv = pj.value
    bxy = lie_bracket_jet(xj, yj).value
    out = (
        np.einsum("...ab,...b->...a", phi2, bxy)
        + lie_bracket_jet(phix, phiy).value
        - np.einsum("...ab,...b->...a", phiv, lie_bracket_jet(phix, yj).value)
        - np.einsum("...ab,...b->...a", phiv, lie_bracket_jet(xj, phiy).value)
    )
    return out


def normality_defect_tensor(pr):
    """``N_phi(d_a, d_b) + 2 sum_i d eta^i(d_a, d_b) xi_i`` as ``[k, a, b]``."""
    return nijenhuis_tensor(pr) + 2 * np.einsum("...iab,...ik->...kab", pr.d_eta, pr.xi)


def normality_defect(s: AlmostSStructure, x: Field, y: Field, pts):
    pr = probe(s, pts)
    nxy = nijenhuis(s, x, y, pr)
    xv, yv = x.eval(pr.pts), y.eval(pr.pts)
    deta = np.einsum("...iab,...a,...b->...i", pr.d_eta, xv, yv)
    return nxy + 2 * np.einsum("...i,...ik->...k", deta, pr.xi)


def h_operator(s: AlmostSStructure, i, pts):
    """``h_i = 1/2 L_{xi_i} phi`` components ``[a, b]``."""
    pr = probe(s, pts)
    return pr.h[:, i]


def divergence_of_xi(pr):
    """``Div xi_alpha`` over the full orthonormal frame, shape ``(N, p)``."""
    proj = np.einsum("...ia,...ja->...ij", pr.frame, pr.frame)
    return np.einsum("...kl,...ikz,...zl->...i", pr.g, pr.nabla_xi, proj)


def mean_curvature_H(s: AlmostSStructure, pts):
    """Mean curvature of the distribution D and the divergences of the Reeb fields.

    ``<H, xi_alpha> = -sum_{E in D-frame} <nabla_E xi_alpha, E>`` (D-frame route);
    returns ``(H (N, m), div_xi (N, p))``.
    """
    pr = probe(s, pts)
    horizontal = pr.frame[:, :, s.p:]
    h_alpha = -np.einsum("...kl,...ikz,...za,...la->...i", pr.g, pr.nabla_xi, horizontal, horizontal)
    gram = np.einsum("...ia,...ab,...jb->...ij", pr.xi, pr.g, pr.xi)
    coeff = np.linalg.solve(gram, h_alpha[..., None])[..., 0]
    mean = np.einsum("...i,...ia->...a", coeff, pr.xi)
    return mean, divergence_of_xi(pr)


def structure_derived(s: AlmostSStructure, pts):
    """Bundle of derived tensors at the points (values only)."""
    pr = probe(s, pts)
    mean, div = mean_curvature_H(s, pr)
    return {
        "F": pr.sasaki_jet.value,
        "h": pr.h,
        "P_D": pr.horizontal_projector,
        "P_Dtilde": pr.vertical_projector,
        "xi_bar": pr.xi_bar,
        "eta_bar": pr.eta_bar,
        "xi_bar_i": pr.xi[:, 1:] - pr.xi[:, :1],
        "H": mean,
        "div_xi": div,
    }

