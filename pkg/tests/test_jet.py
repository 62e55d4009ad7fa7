import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almost_s.jet import Jet, einsum, stack

from oracles import d_central

DIM = 2


def variables(pt, order=3):
    pt = np.asarray(pt, dtype=float)
    return [Jet.variable(pt[..., k], k, DIM, order) for k in range(DIM)]


def fd_jet(fn, pt, h=1e-3):
    """Value, gradient and Hessian of a scalar function by central differences."""
    pt = np.asarray(pt, dtype=float)
    grad = np.array([d_central(fn, pt, k, h) for k in range(DIM)])
    hess = np.array([[d_central(lambda y: d_central(fn, y, j, h), pt, i, h) for j in range(DIM)] for i in range(DIM)])
    return fn(pt), grad, hess


CASES = [
    (lambda x, y: x.sin() * y + x * x, lambda p: np.sin(p[0]) * p[1] + p[0] ** 2),
    (lambda x, y: (x * y).exp() / (y * y + 2.0), lambda p: np.exp(p[0] * p[1]) / (p[1] ** 2 + 2)),
    (lambda x, y: (x * x + y * y + 1.0).log() - (y + 2.0).sqrt(), lambda p: np.log(p @ p + 1) - np.sqrt(p[1] + 2)),
    (lambda x, y: (x - y * 3.0) ** 4 * x.cos(), lambda p: (p[0] - 3 * p[1]) ** 4 * np.cos(p[0])),
]


@pytest.mark.parametrize("jet_fn,np_fn", CASES)
def test_jets_match_finite_differences(jet_fn, np_fn):
    rng = np.random.default_rng(3)
    for pt in rng.uniform(-0.8, 0.8, (5, DIM)):
        j = jet_fn(*variables(pt))
        v, g, h = fd_jet(np_fn, pt)
        assert j.value == pytest.approx(v, abs=1e-12)
        np.testing.assert_allclose(j.parts[1], g, atol=1e-8)
        np.testing.assert_allclose(j.parts[2], h, atol=1e-6)


@pytest.mark.parametrize("jet_fn,np_fn", CASES)
def test_third_derivatives_match_finite_differences(jet_fn, np_fn):
    pt = np.array([0.3, -0.4])
    j = jet_fn(*variables(pt))
    for a in range(DIM):
        hess_fd = d_central(lambda y: fd_jet(np_fn, y, h=1e-2)[2], pt, a, h=1e-2)
        np.testing.assert_allclose(j.parts[3][..., a], hess_fd, atol=1e-5)


def test_derivative_parts_are_symmetric():
    x, y = variables([0.2, 0.7])
    j = (x * y * y).sin() * (x + y).exp()
    np.testing.assert_allclose(j.parts[2], j.parts[2].T, atol=1e-14)
    t = j.parts[3]
    for perm in ["ijk->jik", "ijk->kji", "ijk->ikj"]:
        np.testing.assert_allclose(t, np.einsum(perm, t), atol=1e-13)


def test_batching_matches_pointwise():
    pts = np.random.default_rng(1).uniform(-1, 1, (7, DIM))
    x, y = variables(pts)
    j = x.sin() * y.cos() + x * y
    for n, pt in enumerate(pts):
        xs, ys = variables(pt)
        single = xs.sin() * ys.cos() + xs * ys
        for a, b in zip(j.parts, single.parts):
            np.testing.assert_allclose(a[n], b, atol=1e-15)


def test_matrix_inverse_is_exact_to_order():
    x, y = variables(np.array([0.4, -0.2]))
    a = [[x * x + 2.0, x * y], [x * y, y.cos() + 1.5]]
    from almost_s.jet import assemble
    m = assemble(a, (), DIM, 3)
    prod = einsum("ab,bc->ac", m, m.inv())
    np.testing.assert_allclose(prod.value, np.eye(2), atol=1e-14)
    for part in prod.parts[1:]:
        np.testing.assert_allclose(part, 0.0, atol=1e-13)


def test_stack_adds_trailing_component_axis():
    x, y = variables([0.1, 0.2])
    s = stack([x * 1.0, y * 2.0])
    assert s.shape == (2,)
    assert s.parts[1].shape == (2, 2)
    np.testing.assert_allclose(s.parts[1], [[1.0, 0.0], [0.0, 2.0]])


def test_integer_powers_only():
    x, _ = variables([0.5, 0.5])
    with pytest.raises(TypeError):
        x ** 0.5
    with pytest.raises(TypeError):
        x ** -1
    assert (x ** 0).value == pytest.approx(1.0)


def test_reciprocal_of_zero_raises():
    x, _ = variables([0.0, 1.0])
    with pytest.raises(ZeroDivisionError):
        1.0 / x


finite = st.floats(min_value=-2, max_value=2, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(finite, finite, finite, finite)
def test_leibniz_rule(a, b, px, py):
    x, y = variables([px, py])
    f = (x * a).sin() + y
    g = (y * b).cos() * x
    prod = f * g
    np.testing.assert_allclose(prod.parts[1], f.parts[1] * g.value + f.value * g.parts[1], atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(finite, finite)
def test_chain_rule_through_exp_log(px, py):
    x, y = variables([px, py])
    u = x * x + y * y + 1.0
    back = u.log().exp()
    for a, b in zip(back.parts, u.parts):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
