"""Coordinate charts, jet-level fields and sampling."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .jet import Jet, assemble

KINDS = ("scalar", "vector", "one-form", "endomorphism", "metric", "two-form")

_COMPONENT_RANK = {
    "scalar": 0,
    "vector": 1,
    "one-form": 1,
    "endomorphism": 2,
    "metric": 2,
    "two-form": 2,
}


class ChartError(ValueError):
    pass


class DegenerateMetricError(ValueError):
    """Raised when a metric is singular or not positive definite."""


@dataclass(frozen=True)
class Chart:
    """A coordinate box with optional per-coordinate periodicity."""

    box: tuple
    names: tuple
    periodic: tuple = None

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        names = tuple(str(n) for n in self.names)
        periodic = tuple(bool(b) for b in (self.periodic or (False,) * len(box)))
        if not (len(box) == len(names) == len(periodic)) or not box:
            raise ChartError("box, names and periodic mask must have the same positive length")
        for lo, hi in box:
            if not hi > lo:
                raise ChartError(f"interval [{lo}, {hi}] has non-positive length")
        if len(set(names)) != len(names):
            raise ChartError("coordinate names must be distinct")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "periodic", periodic)

    @property
    def dim(self):
        return len(self.box)

    @property
    def lower(self):
        return np.array([lo for lo, _ in self.box])

    @property
    def upper(self):
        return np.array([hi for _, hi in self.box])

    def wrap(self, pts):
        """Wrap periodic coordinates back into the box."""
        pts = np.array(pts, dtype=float, copy=True)
        lo, hi = self.lower, self.upper
        for k, per in enumerate(self.periodic):
            if per:
                pts[..., k] = lo[k] + np.mod(pts[..., k] - lo[k], hi[k] - lo[k])
        return pts

    def contains(self, pts):
        pts = self.wrap(pts)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=-1)

    def sample(self, n=200, seed=42, shrink=0.05):
        """Uniform points in the box shrunk by ``shrink`` of its width per side."""
        lo, hi = self.lower, self.upper
        width = hi - lo
        rng = np.random.default_rng(seed)
        u = rng.random((n, self.dim))
        return lo + shrink * width + u * (1 - 2 * shrink) * width


@dataclass(frozen=True)
class Sampler:
    samples: int = 200
    seed: int = 42
    shrink: float = 0.05

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0 <= self.shrink < 0.5:
            raise ValueError("shrink must lie in [0, 0.5)")

    def points(self, chart):
        return chart.sample(self.samples, self.seed, self.shrink)


@dataclass(frozen=True, eq=False)
class Field:
    """A tensor field on a chart with exact jets up to order 3.

    ``fn`` receives the list of coordinate jets and returns either a
    :class:`Jet` or a nested list of scalar jets / numbers laid out in
    component order.  Endomorphisms are indexed ``[a, b]`` for ``T^a_b``.
    """

    kind: str
    dim: int
    fn: Callable = field(repr=False)
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")

    @property
    def component_shape(self):
        return (self.dim,) * _COMPONENT_RANK[self.kind]

    def jet(self, pts, order=2):
        pts = np.ascontiguousarray(pts, dtype=float)
        if pts.shape[-1] != self.dim:
            raise ChartError(f"points have {pts.shape[-1]} coordinates, field expects {self.dim}")
        return _cached_jet(self, pts.tobytes(), pts.shape, int(order))

    def eval(self, pts):
        return self.jet(pts, 0).value

    def scaled(self, c, name=None):
        base = self
        return Field(self.kind, self.dim, lambda x: base._raw(x) * c, name or f"{c}*{self.name}")

    def __add__(self, other):
        if not isinstance(other, Field) or other.kind != self.kind:
            return NotImplemented
        a, b = self, other
        return Field(self.kind, self.dim, lambda x: a._raw(x) + b._raw(x), f"{a.name}+{b.name}")

    def _raw(self, coords):
        """Evaluate ``fn`` on coordinate jets and normalise to a single Jet."""
        out = self.fn(coords)
        order = coords[0].order
        batch = coords[0].shape
        if not isinstance(out, Jet):
            out = assemble(out, batch, self.dim, order)
        comp = self.component_shape
        want = tuple(batch) + comp
        if out.shape != want:
            out = Jet(
                [np.broadcast_to(p, want + (self.dim,) * k).copy() for k, p in enumerate(out.parts)],
                self.dim,
            )
        if out.order > order:
            out = out.truncate(order)
        elif out.order < order:
            raise ValueError(f"field {self.name!r} produced jets of order {out.order} < {order}")
        return out


@lru_cache(maxsize=256)
def _cached_jet(fld, key, shape, order):
    pts = np.frombuffer(key, dtype=float).reshape(shape)
    coords = [Jet.variable(pts[..., k], k, fld.dim, order) for k in range(fld.dim)]
    out = fld._raw(coords)
    for p in out.parts:
        p.setflags(write=False)
    return out


def constant_field(kind, value, dim, name=""):
    value = np.asarray(value, dtype=float)
    return Field(kind, dim, lambda x: Jet.constant(value, dim, x[0].order), name)


def coordinate_vector(k, dim):
    e = np.zeros(dim)
    e[k] = 1.0
    return constant_field("vector", e, dim, name=f"d{k}")


def position_field(dim, scale=1.0):
    """The radial field ``scale * sum_k x^k d_k``."""
    return Field("vector", dim, lambda x: [c * scale for c in x], name="position")


def scalar_field(fn, dim, name=""):
    return Field("scalar", dim, lambda x: fn(*x), name)


def linear_combination(fields: Sequence[Field], coeffs, name=""):
    """``sum_j coeffs[j] * fields[j]`` with constant coefficients."""
    if not fields:
        raise ValueError("need at least one field")
    kind, dim = fields[0].kind, fields[0].dim
    coeffs = [float(c) for c in coeffs]
    fs = list(fields)

    def fn(x):
        total = None
        for c, f in zip(coeffs, fs):
            t = f._raw(x) * c
            total = t if total is None else total + t
        return total

    return Field(kind, dim, fn, name)


def as_batch(pts, dim):
    """Return ``(points (N, dim), single)`` for a point or a batch of points."""
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != dim:
        raise ChartError(f"expected points with {dim} coordinates, got shape {pts.shape}")
    return pts, single
