"""Model spaces with known geometry.

The standard structure on R^{2n+p} with coordinates
``(x^1..x^n, y^1..y^n, z^1..z^p)`` is

    eta^a = 1/2 (dz^a - sum_i y^i dx^i),     xi_a = 2 d/dz^a,
    g     = 1/4 sum_i (dx^i dx^i + dy^i dy^i) + sum_a eta^a (x) eta^a,
    phi(d/dx^i) = -d/dy^i,   phi(d/dy^i) = d/dx^i + y^i sum_a d/dz^a,   phi(xi_a) = 0.

These constants make ``d eta^a(X, Y) = g(X, phi Y)`` hold exactly under the
one-form exterior-derivative factor 1/2 used in :mod:`almost_s.geometry`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chart import Chart, Field, constant_field, coordinate_vector
from .jet import Jet, assemble, einsum
from .structure import AlmostSStructure, build_structure

HORIZONTAL_HALF_WIDTH = 1.0


def standard_chart(n, p, periodic=False):
    names = [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + [f"z{a + 1}" for a in range(p)]
    box = [(-HORIZONTAL_HALF_WIDTH, HORIZONTAL_HALF_WIDTH)] * (2 * n) + [(0.0, 2 * math.pi)] * p
    return Chart(box, names, (bool(periodic),) * (2 * n + p))


def _eta_components(coords, n, p, a):
    m = 2 * n + p
    comps = [0.0] * m
    for i in range(n):
        comps[i] = coords[n + i] * -0.5
    comps[2 * n + a] = 0.5
    return comps


def standard_metric(n, p, vertical_scale=1.0):
    """``1/4 sum (dx^2 + dy^2) + vertical_scale * sum_a eta^a (x) eta^a``."""
    m = 2 * n + p
    if vertical_scale <= 0:
        raise ValueError("vertical_scale must be positive")

    def fn(x):
        order = x[0].order
        batch = x[0].shape
        etas = [assemble(_eta_components(x, n, p, a), batch, m, order) for a in range(p)]
        horiz = np.zeros((m, m))
        horiz[: 2 * n, : 2 * n] = 0.25 * np.eye(2 * n)
        total = Jet.constant(np.broadcast_to(horiz, tuple(batch) + (m, m)).copy(), m, order)
        for e in etas:
            total = total + einsum("i,j->ij", e, e) * vertical_scale
        return total

    return Field("metric", m, fn, name=f"g_std(n={n},p={p},s={vertical_scale})")


def standard_s_structure(n, p, periodic=False):
    if n < 1 or p < 1:
        raise ValueError(f"standard structure needs n >= 1 and p >= 1, got n={n}, p={p}")
    m = 2 * n + p
    chart = standard_chart(n, p, periodic)
    g = standard_metric(n, p)

    def phi_fn(x):
        comps = [[0.0] * m for _ in range(m)]
        for i in range(n):
            comps[n + i][i] = -1.0  # phi(d_x_i) = -d_y_i
            comps[i][n + i] = 1.0  # phi(d_y_i) = d_x_i + y_i sum d_z
            for a in range(p):
                comps[2 * n + a][n + i] = x[n + i]
        return comps

    phi = Field("endomorphism", m, phi_fn, name="phi_std")
    xi = []
    eta = []
    for a in range(p):
        e = np.zeros(m)
        e[2 * n + a] = 2.0
        xi.append(constant_field("vector", e, m, name=f"xi{a + 1}"))
        eta.append(Field("one-form", m, lambda x, a=a: _eta_components(x, n, p, a), name=f"eta{a + 1}"))
    return build_structure(
        chart, g, phi, xi, eta, n, p, name="standard-s", params={"periodic": bool(periodic)}
    )


def flat_torus_degenerate(p):
    """n = 0: flat torus, phi = 0, xi_i = d/dz^i, eta^i = dz^i."""
    if p < 1:
        raise ValueError("p must be >= 1")
    chart = Chart([(0.0, 2 * math.pi)] * p, [f"z{a + 1}" for a in range(p)], (True,) * p)
    g = constant_field("metric", np.eye(p), p, name="g_flat")
    phi = constant_field("endomorphism", np.zeros((p, p)), p, name="phi_zero")
    xi = [coordinate_vector(a, p) for a in range(p)]
    eta = [constant_field("one-form", np.eye(p)[a], p, name=f"dz{a + 1}") for a in range(p)]
    return build_structure(chart, g, phi, xi, eta, 0, p, name="flat-torus", params={"periodic": True})


def round_sphere(m, r=1.0):
    """Polar chart of the round m-sphere of radius ``r`` (m in {2, 3}), poles excluded."""
    if r <= 0:
        raise ValueError("radius must be positive")
    cut = 0.2
    if m == 2:
        chart = Chart([(cut, math.pi - cut), (0.0, 2 * math.pi)], ["theta", "phi"], (False, True))

        def fn(x):
            s = x[0].sin()
            return [[r * r, 0.0], [0.0, (s * s) * (r * r)]]

    elif m == 3:
        chart = Chart(
            [(cut, math.pi - cut), (cut, math.pi - cut), (0.0, 2 * math.pi)],
            ["chi", "theta", "phi"],
            (False, False, True),
        )

        def fn(x):
            s1 = x[0].sin()
            s2 = x[1].sin()
            a = (s1 * s1) * (r * r)
            return [[r * r, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a * (s2 * s2)]]

    else:
        raise ValueError(f"round_sphere supports m in {{2, 3}}, got {m}")
    return chart, Field("metric", m, fn, name=f"sphere(m={m},r={r})")


def flat_chart(m):
    if m < 1:
        raise ValueError("m must be >= 1")
    chart = Chart([(-1.0, 1.0)] * m, [f"x{i + 1}" for i in range(m)])
    return chart, constant_field("metric", np.eye(m), m, name=f"flat(m={m})")


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    parameters: dict
    expected: tuple
    description: str


ENTRIES = (
    CatalogEntry(
        "standard-s",
        {"n": ">=1", "p": ">=1", "periodic": "bool"},
        ("all axioms", "all identities", "normal (S-manifold)", "h_i = 0", "K(xi_i, xi_j) = 0",
         "totally geodesic leaves", "Ric(xi_i, xi_j) = 2n"),
        "standard S-structure on R^{2n+p}",
    ),
    CatalogEntry(
        "flat-torus",
        {"p": ">=1"},
        ("all axioms (degenerate n=0)", "Ric = 0", "[xi_i, xi_j] = 0"),
        "flat torus with phi = 0",
    ),
    CatalogEntry("sphere", {"m": "2|3", "radius": ">0"}, ("Ric = (m-1) g / r^2", "s = m(m-1)/r^2"), "round sphere chart"),
    CatalogEntry("flat", {"m": ">=1"}, ("R = 0",), "Euclidean chart"),
)


def entry_names():
    return tuple(e.name for e in ENTRIES)


def make(name, n=1, p=1, m=2, radius=1.0, periodic=False):
    """Construct a catalog object by name: a structure, or ``(chart, g)``."""
    if name == "standard-s":
        return standard_s_structure(n, p, periodic)
    if name == "flat-torus":
        return flat_torus_degenerate(p)
    if name == "sphere":
        return round_sphere(m, radius)
    if name == "flat":
        return flat_chart(m)
    raise KeyError(f"unknown catalog entry {name!r}; choose from {', '.join(entry_names())}")


__all__ = [
    "AlmostSStructure",
    "CatalogEntry",
    "ENTRIES",
    "flat_chart",
    "flat_torus_degenerate",
    "make",
    "round_sphere",
    "standard_metric",
    "standard_s_structure",
]
