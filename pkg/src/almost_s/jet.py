"""Truncated multivariate Taylor jets.

A :class:`Jet` stores a tensor-valued function of the chart coordinates
together with all of its partial derivatives up to a fixed order (at most 3
in practice).  Part ``k`` has shape ``S + (dim,) * k`` where ``S`` is the
value shape (leading batch axes followed by component axes); the trailing
``k`` axes are derivative indices and every part is symmetric in them.

Arithmetic propagates derivatives exactly (Leibniz rule for products,
Faa di Bruno for univariate compositions), so nothing here is a
finite-difference approximation.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

_DLETTERS = "ABCDEFGH"


@lru_cache(maxsize=None)
def _subsets(k):
    idx = range(k)
    out = []
    for r in range(k + 1):
        for s in itertools.combinations(idx, r):
            out.append((s, tuple(i for i in idx if i not in s)))
    return tuple(out)


@lru_cache(maxsize=None)
def _set_partitions(k):
    """All set partitions of range(k) as tuples of blocks."""
    def rec(items):
        if not items:
            yield ()
            return
        first, rest = items[0], items[1:]
        for part in rec(rest):
            for i in range(len(part)):
                yield part[:i] + ((first,) + part[i],) + part[i + 1:]
            yield ((first,),) + part
    return tuple(rec(tuple(range(k))))


def _letters(ids):
    return "".join(_DLETTERS[i] for i in ids)


class Jet:
    """Exact derivative jet of a tensor-valued field.

    Parameters
    ----------
    parts : sequence of ndarray
        ``parts[k]`` holds the k-th derivatives, derivative axes last.
    dim : int
        Number of chart coordinates.
    """

    __slots__ = ("parts", "dim")
    __array_ufunc__ = None

    def __init__(self, parts, dim):
        self.parts = tuple(np.asarray(p, dtype=float) for p in parts)
        self.dim = int(dim)

    # -- construction -------------------------------------------------
    @classmethod
    def variable(cls, values, k, dim, order):
        values = np.asarray(values, dtype=float)
        parts = [values]
        for r in range(1, order + 1):
            p = np.zeros(values.shape + (dim,) * r)
            if r == 1:
                p[..., k] = 1.0
            parts.append(p)
        return cls(parts, dim)

    @classmethod
    def constant(cls, value, dim, order):
        value = np.asarray(value, dtype=float)
        parts = [value] + [np.zeros(value.shape + (dim,) * r) for r in range(1, order + 1)]
        return cls(parts, dim)

    @property
    def order(self):
        return len(self.parts) - 1

    @property
    def value(self):
        return self.parts[0]

    @property
    def shape(self):
        return self.parts[0].shape

    def __repr__(self):
        return f"Jet(shape={self.shape}, order={self.order}, dim={self.dim})"

    def truncate(self, order):
        if order > self.order:
            raise ValueError(f"cannot raise jet order {self.order} to {order}")
        return Jet(self.parts[: order + 1], self.dim)

    # -- derivative bookkeeping ----------------------------------------
    def diff(self, k):
        """Jet of the partial derivative along coordinate ``k``."""
        if self.order < 1:
            raise ValueError("order-0 jet has no derivative information")
        return Jet([p[..., k] for p in self.parts[1:]], self.dim)

    def grad(self):
        """Jet of all first partials; the new component axis is last."""
        if self.order < 1:
            raise ValueError("order-0 jet has no derivative information")
        return Jet(self.parts[1:], self.dim)

    # -- elementwise arithmetic ----------------------------------------
    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet((self.parts[0] + other,) + self.parts[1:], self.dim)
        r = min(self.order, other.order)
        return Jet([a + b for a, b in zip(self.parts[: r + 1], other.parts[: r + 1])], self.dim)

    __radd__ = __add__

    def __neg__(self):
        return Jet([-p for p in self.parts], self.dim)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other, dtype=float)
            return Jet([p * c.reshape(c.shape + (1,) * k) for k, p in enumerate(self.parts)], self.dim)
        return einsum(",->", self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise TypeError("jets support non-negative integer powers only")
        n = int(n)
        x = self.parts[0]
        derivs = []
        coef = 1.0
        for j in range(self.order + 1):
            if j > n:
                derivs.append(np.zeros_like(x))
            else:
                derivs.append(coef * x ** (n - j))
                coef *= n - j
        return self.compose(derivs)

    # -- univariate compositions ---------------------------------------
    def compose(self, fderivs):
        """Apply an elementwise function given its derivatives at the value.

        ``fderivs[j]`` is the j-th derivative of the outer function evaluated
        at ``self.value``; at least ``order + 1`` entries are required.
        """
        a = self.parts
        out = [np.asarray(fderivs[0], dtype=float)]
        for k in range(1, self.order + 1):
            acc = None
            for blocks in _set_partitions(k):
                ops = [fderivs[len(blocks)]]
                subs = ["..."]
                for b in blocks:
                    ops.append(a[len(b)])
                    subs.append("..." + _letters(b))
                term = np.einsum(",".join(subs) + "->..." + _letters(range(k)), *ops)
                acc = term if acc is None else acc + term
            out.append(acc)
        return Jet(out, self.dim)

    def reciprocal(self):
        x = self.parts[0]
        if np.any(x == 0):
            raise ZeroDivisionError("reciprocal of a jet with zero value")
        inv = 1.0 / x
        d = [inv, -inv**2, 2 * inv**3, -6 * inv**4, 24 * inv**5]
        return self.compose(d[: self.order + 1])

    def sin(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self.compose([s, c, -s, -c][: self.order + 1])

    def cos(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self.compose([c, -s, -c, s][: self.order + 1])

    def exp(self):
        e = np.exp(self.value)
        return self.compose([e] * (self.order + 1))

    def log(self):
        x = self.value
        inv = 1.0 / x
        return self.compose([np.log(x), inv, -inv**2, 2 * inv**3][: self.order + 1])

    def sqrt(self):
        x = self.value
        r = np.sqrt(x)
        return self.compose([r, 0.5 / r, -0.25 / (r * x), 0.375 / (r * x * x)][: self.order + 1])

    # -- tensor operations ----------------------------------------------
    def inv(self):
        """Matrix inverse over the last two component axes.

        Uses ``g^{-1} = (I + A)^{-1} g0^{-1}`` with ``A = g0^{-1}(g - g0)``;
        ``A`` has vanishing value, so the Neumann series truncates exactly.
        """
        g0 = self.parts[0]
        inv0 = np.linalg.inv(g0)
        delta = Jet((np.zeros_like(g0),) + self.parts[1:], self.dim)
        a = einsum("ij,jk->ik", inv0, delta)
        eye = np.broadcast_to(np.eye(g0.shape[-1]), g0.shape)
        term = Jet.constant(eye, self.dim, self.order)
        total = term
        for _ in range(self.order):
            term = -einsum("ij,jk->ik", a, term)
            total = total + term
        return einsum("ij,jk->ik", total, inv0)

    def transpose(self, spec):
        """Permute component axes, e.g. ``transpose("ijk->kij")``."""
        return einsum(spec, self)


def einsum(spec, *operands):
    """Einstein summation over component axes of jets (and plain arrays).

    ``spec`` names component axes only; leading batch axes are matched by an
    implicit ellipsis and derivative axes are appended automatically.
    Accepts one or two operands; at least one must be a :class:`Jet`.
    """
    lhs, out = spec.split("->")
    subs = lhs.split(",")
    if len(subs) != len(operands):
        raise ValueError("operand count does not match subscripts")
    jets = [op for op in operands if isinstance(op, Jet)]
    if not jets:
        return np.einsum(",".join("..." + s for s in subs) + "->..." + out, *operands)
    dim = jets[0].dim
    if len(operands) == 1:
        (a,) = operands
        return Jet(
            [np.einsum(f"...{subs[0]}{_letters(range(k))}->...{out}{_letters(range(k))}", p)
             for k, p in enumerate(a.parts)],
            dim,
        )
    if len(operands) != 2:
        raise ValueError("einsum supports one or two operands")
    a, b = operands
    if not isinstance(a, Jet) or not isinstance(b, Jet):
        # constant operand: linear map applied part by part
        jet, const = (a, b) if isinstance(a, Jet) else (b, a)
        parts = []
        for k, p in enumerate(jet.parts):
            d = _letters(range(k))
            if jet is a:
                e = f"...{subs[0]}{d},...{subs[1]}->...{out}{d}"
                parts.append(np.einsum(e, p, const))
            else:
                e = f"...{subs[0]},...{subs[1]}{d}->...{out}{d}"
                parts.append(np.einsum(e, const, p))
        return Jet(parts, dim)
    order = min(a.order, b.order)
    parts = []
    for k in range(order + 1):
        acc = None
        d = _letters(range(k))
        for sa, sb in _subsets(k):
            e = f"...{subs[0]}{_letters(sa)},...{subs[1]}{_letters(sb)}->...{out}{d}"
            term = np.einsum(e, a.parts[len(sa)], b.parts[len(sb)])
            acc = term if acc is None else acc + term
        parts.append(acc)
    return Jet(parts, dim)


def stack(jets):
    """Stack equally shaped jets along a new trailing component axis."""
    order = min(j.order for j in jets)
    return Jet(
        [np.stack([j.parts[k] for j in jets], axis=-(k + 1)) for k in range(order + 1)],
        jets[0].dim,
    )


def assemble(components, batch_shape, dim, order):
    """Stack a nested list of scalar jets / numbers into one tensor jet."""
    arr = np.empty(_nested_shape(components), dtype=object)
    _fill(arr, components, ())
    comp_shape = arr.shape
    parts = []
    for k in range(order + 1):
        p = np.zeros(tuple(batch_shape) + comp_shape + (dim,) * k)
        for idx in np.ndindex(*comp_shape):
            item = arr[idx]
            if isinstance(item, Jet):
                if item.order < k:
                    raise ValueError("component jet order too low")
                p[(slice(None),) * len(batch_shape) + idx] = item.parts[k]
            elif k == 0:
                p[(slice(None),) * len(batch_shape) + idx] = float(item)
        parts.append(p)
    return Jet(parts, dim)


def _nested_shape(obj):
    if isinstance(obj, (list, tuple)):
        if not obj:
            return (0,)
        return (len(obj),) + _nested_shape(obj[0])
    return ()


def _fill(arr, obj, idx):
    if isinstance(obj, (list, tuple)):
        for i, item in enumerate(obj):
            _fill(arr, item, idx + (i,))
    else:
        arr[idx] = obj
